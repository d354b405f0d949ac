"""
Counting and pointing
=====================

Two more mechanisms take the alignment function as a plug-in. A single-step
read unit scores objects against a control state and feeds a count head;
a one-block transformer encoder over a joint question/object/OCR sequence
points at the OCR token that answers the question.

The counting runs here are short; the full comparison lives in
``configs/counting_default.json`` and is run with ``align-bench run``.
"""

import numpy as np

from alignbench import (CountingConfig, CountingModel, PointerConfig, PointerModel, gen_counting, gen_pointer,
                        train)

counting = gen_counting(CountingConfig(), seed=2)
test = CountingModel.prepare(counting.test)
multi = np.array([inst.n_queried >= 2 for inst in counting.test])

print("counting, 60 epochs (chance is 1/7)")
for name in ("scaled_dot", "biased_general_star"):
    model = CountingModel.init(name, n_objects=6, d=16, seed=2)
    train(model, model.prepare(counting.train), epochs=60, batch_size=32, lr=1e-3, seed=2)
    hit = model.predict_proba(test).argmax(-1) == test["target"][:, 0]
    print(f"  {name:>20}: overall {hit.mean():.3f}   multi-object {hit[multi].mean():.3f}")

cfg = PointerConfig()
pointer = gen_pointer(cfg, seed=3)
test = PointerModel.prepare(pointer.test)
print(f"\npointer, 5 epochs (chance is 1/{cfg.O})")
for name in ("dot", "scaled_dot", "activated_general"):
    model = PointerModel.init(name, cfg.d_in, 16, 4, 32, (cfg.M, cfg.N, cfg.O), seed=3)
    train(model, model.prepare(pointer.train), epochs=5, batch_size=32, lr=1e-3, seed=3)
    acc = np.mean(model.predict_proba(test).argmax(-1) == test["target"][:, 0])
    print(f"  {name:>20}: accuracy {acc:.3f}")
