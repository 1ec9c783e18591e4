"""Hall-Littlewood PushTASEP: simulation, exact formulas and limit-law numerics."""
__version__ = "0.1.0"
