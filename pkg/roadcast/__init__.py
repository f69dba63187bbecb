# roadcast — roadside access-point deployment planner
__version__ = "0.1.0"
