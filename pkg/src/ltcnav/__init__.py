"""Continuous-time causal navigation: cells, training, causal probes and a voxel simulator."""
