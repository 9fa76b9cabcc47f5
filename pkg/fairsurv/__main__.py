from fairsurv.cli.main import main

raise SystemExit(main())
