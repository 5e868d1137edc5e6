FASTMATH = False
NORM_TOL = 1e-12
# Fixed number of partial sums per patch in batch gradients; independent of
# the thread count so reductions are bit-reproducible.
N_REDUCTION_CHUNKS = 16
# Samples per block when evaluating large datasets.
EVAL_BLOCK = 1000
