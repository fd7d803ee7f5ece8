"""Exact linear programming: models, the cut-LP, CG cuts and the k-wide-LP."""
