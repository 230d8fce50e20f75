"""How the two decoders see each other.

1. With merge weight zero the coupled decoders compute exactly what two
   independent decoders compute.
2. Once the weight moves off zero, the transcript and translation streams
   influence each other, but only inside the window allowed by wait-k.
"""
import numpy as np

from duodec.core.tensor import Tensor
from duodec.model import dual_decoder as D
from duodec.model.config import BOS_ID, ModelConfig
from duodec.model.params import init_params

rng = np.random.default_rng(0)
small = dict(enc_layers=1, dec_layers=2, d_model=16, heads=2, d_ffn=32, vocab_size=12, d_feat=8)
independent = ModelConfig(variant="independent", **small)
parallel = ModelConfig(variant="parallel", dual_at_self=True, **small)

x = Tensor(rng.normal(size=(16, 8)))
y = np.array([BOS_ID, 5, 7, 9, 4])
z = np.array([3, 8, 6, 10])

ind_params = init_params(independent, 0)
par_params = init_params(parallel, 0)   # same seed: shared tensors are identical, merge weights start at 0
mem = D.encode(x, ind_params, independent)
a = D.forward_teacher_forced(mem, y, z, ind_params, independent)
b = D.forward_teacher_forced(mem, y, z, par_params, parallel)
print("lambda = 0, parallel == independent bitwise:",
      np.array_equal(a[0].data, b[0].data) and np.array_equal(a[1].data, b[1].data))

for name in par_params:
    if name.endswith(".lam"):
        par_params[name].data[...] = 0.5
for k in (0, 2):
    cfg = parallel.replace(wait_k=k)
    base_y, _, _ = D.forward_teacher_forced(mem, y, z, par_params, cfg)
    z_changed = z.copy()
    z_changed[2] = 11
    moved_y, _, _ = D.forward_teacher_forced(mem, y, z_changed, par_params, cfg)
    rows = [int(i) for i in np.flatnonzero(np.any(base_y.data != moved_y.data, axis=1))]
    print(f"wait_k={k}: changing translation input 2 moves transcript rows {rows}")
    print("  transcript-side dual mask (row i sees translation inputs j):")
    print("  " + str(D.dual_mask(len(y), len(z), -k).astype(int)).replace("\n", "\n  "))
