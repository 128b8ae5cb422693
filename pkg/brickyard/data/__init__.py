"""Package data: the curated Brick ontology subset."""
