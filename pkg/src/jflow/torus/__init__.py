"""The critical J-equation on flat tori."""
