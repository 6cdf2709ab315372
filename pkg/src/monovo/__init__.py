"""Monocular visual odometry with GRIC-selected essential/PnP motion and
depth-map scale recovery, plus KITTI-style evaluation and a synthetic oracle."""

__version__ = "0.1.0"
