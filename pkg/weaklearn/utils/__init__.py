"""Configuration, logging and reporting utilities."""
