"""Domain models: datasets, Cox model, similarity structures, reports."""
