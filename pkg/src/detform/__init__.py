"""One-dimensional characteristic parametric determining form for the 2D NSE."""
