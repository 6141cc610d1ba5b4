"""Calabi-ansatz reduction of the J-flow on Bl_p P^3."""
