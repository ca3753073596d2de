"""
warpstream: sparse radiance warping on a voxel-grid NeRF renderer, with a
trace-driven model of streaming MVoxel execution, SRAM banking, the
Gathering Unit and DRAM/SRAM energy.
"""

__version__ = "0.1.0"
