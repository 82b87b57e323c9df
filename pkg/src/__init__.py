"""
APDS Downlink Scheduling Simulator
A frame-based IEEE 802.16 downlink simulator with adaptive priority-based
scheduling and FIFO/DFPQ baselines.
"""

__version__ = "1.0.0"
