"""iscreen: eye-controlled interaction engine.

Synthetic IR eye frames in; calibrated on-screen gaze coordinates and UI
events (tap, scroll, gesture typing) out. See README for the pipeline tour.
"""

__version__ = "0.1.0"
