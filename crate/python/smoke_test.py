"""Smoke test for the vemflux_py extension module.

Build with `maturin develop -m crates/py/Cargo.toml --features extension-module`,
or `cargo build --release -p vemflux-py --features extension-module` and copy
target/release/libvemflux_py.so to vemflux_py.so on PYTHONPATH.
"""

import json

import vemflux_py as vf

mesh = vf.Mesh.lshape(2)
assert mesh.n_cells == 12
assert abs(mesh.total_area() - 3.0) < 1e-12
fine = mesh.refine([0, 5])
assert fine.n_cells == 18
doc = json.loads(fine.to_json())
assert len(doc["cells"]) == 18
assert vf.Mesh(fine.to_json()).n_cells == 18

row = vf.solve("lshape-r23", 2, mesh=vf.Mesh("lshape(4)"))
assert row["ncells"] == 48 and len(row["eta_k"]) == 48
assert 1.0 <= row["I_loc"] <= 4.0, row

history, final = vf.run("lshape-r23", mode="hp-adaptive", dof_budget=500)
assert history[-1]["ndofs"] > 500 or len(history) == 100
assert final.n_cells >= history[-1]["ncells"]
errors = [r["error"] for r in history]
assert errors[-1] < errors[0]

try:
    vf.run("lshape-r23", p=0)
except ValueError:
    pass
else:
    raise AssertionError("p = 0 accepted")

ok, table = vf.verify("equilibration")
assert ok, table
print("vemflux_py", vf.__version__, "smoke test passed")
