import os

# keep BLAS single-threaded: the workloads are tiny-matrix bound and the
# acceptance studies parallelize across processes instead
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")
