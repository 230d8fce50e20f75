"""Step-by-step decoding reproduces the teacher-forced forward pass.

decode_step keeps per-layer caches for both streams. Feeding the same tokens
one step at a time, following the wait-k schedule, gives the same logits as
running the whole sequence at once.
"""
import numpy as np

from duodec.core.tensor import Tensor
from duodec.model import dual_decoder as D
from duodec.model.config import BOS_ID, ModelConfig
from duodec.model.params import init_params

rng = np.random.default_rng(1)
cfg = ModelConfig(variant="cross", dual_at_self=True, wait_k=2, enc_layers=1, dec_layers=2, d_model=16, heads=2,
                  d_ffn=32, vocab_size=12, d_feat=8)
params = init_params(cfg, 3)
for name in params:
    if name.endswith(".lam"):
        params[name].data[...] = 0.5
mem = D.encode(Tensor(rng.normal(size=(20, 8))), params, cfg)
y = np.array([BOS_ID, 4, 9, 5, 7, 6])
z = np.array([3, 11, 8, 10])

ly, lz, _ = D.forward_teacher_forced(mem, y, z, params, cfg)

states = D.init_states(cfg, np.float64)
ny = nz = 0
step_y, step_z = [], []
step = 0
while ny < len(y) or nz < len(z):
    if ny == len(y) and not states.asr_done:
        states = states.finish("asr")
    if nz == len(z) and not states.st_done:
        states = states.finish("st")
    go_y, go_z = D.may_advance(states, cfg)
    print(f"step {step}: advance transcript={go_y!s:5} translation={go_z}")
    a, b, states = D.decode_step(states, mem, y[ny] if go_y else None, z[nz] if go_z else None, params, cfg)
    if go_y:
        step_y.append(a)
        ny += 1
    if go_z:
        step_z.append(b)
        nz += 1
    step += 1

print("max |difference| transcript:", np.abs(np.array(step_y) - ly.data).max())
print("max |difference| translation:", np.abs(np.array(step_z) - lz.data).max())
