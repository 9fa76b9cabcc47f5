# fairsurv test suite
