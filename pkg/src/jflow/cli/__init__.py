"""Configuration, dispatch and reporting for the jflow command."""
