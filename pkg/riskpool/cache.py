from joblib import Memory

# riskshare.py swaps in a disk-backed Memory when --cache is given, before
# the checkers are imported. Otherwise nothing is cached (backend=None).
memory = Memory(backend=None)
