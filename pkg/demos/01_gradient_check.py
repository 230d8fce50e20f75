"""Check the hand-written backward pass against central differences.

The toy model is a parallel dual-decoder with dual attention at both the
self-attention and source-attention sub-layers, so every parameter family
(encoder conv, both decoders, dual attention, merge weights) is covered.
"""
import time

from duodec.toy import DEFAULT_GRADCHECK_MODEL, toy_gradcheck

print("model:", DEFAULT_GRADCHECK_MODEL)
start = time.perf_counter()
report = toy_gradcheck()
print(f"checked {report.n_checked} coordinates in {time.perf_counter() - start:.1f} s")
print(f"max relative error {report.max_rel_error:.2e} (tolerance {report.tol:g}), worst at {report.worst}")
print(f"{report.refined} coordinates needed a smaller step (ReLU kinks near the probe point)")
print("passed" if report.passed else "FAILED")
