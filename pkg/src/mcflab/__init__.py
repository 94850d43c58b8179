"""Graphical mean curvature flow laboratory."""
