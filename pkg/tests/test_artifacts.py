import numpy as np

import capexbound as cb
from capexbound.artifacts import (
    read_boundary_csv,
    write_controls_csv,
    write_paths_csv,
)


def test_controls_csv_shape_and_values(tmp_path):
    grid = cb.TimeGrid.uniform(1.0, 4)
    coeffs = cb.CoefficientSet.build(grid, mu_C=0.1, sigma=0.2, f_C=1.0,
                                     mu_F=0.05, w=1.0, r=1.0)
    batch = cb.simulate(coeffs, grid, 0, 6, cb.MEASURE_P, seed=0)
    plans = cb.zero_plan(batch, 0.5)
    cap = cb.controlled_capacity(batch.values, plans)
    path = tmp_path / "controls.csv"
    write_controls_csv(str(path), grid, plans, cap, limit=3)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "path_id,t,nubar,nu,capacity"
    assert len(lines) == 1 + 3 * (grid.n_steps + 1)
    first = lines[1].split(",")
    assert first[0] == "0"
    assert float(first[4]) == 0.5 * batch.values[0, 0]


def test_paths_csv_carries_measure(tmp_path):
    grid = cb.TimeGrid.uniform(1.0, 3)
    coeffs = cb.CoefficientSet.build(grid, mu_C=0.1, sigma=0.2, f_C=1.0,
                                     mu_F=0.05, w=1.0, r=1.0)
    batch = cb.simulate(coeffs, grid, 1, 4, cb.MEASURE_Q, seed=1)
    path = tmp_path / "paths.csv"
    write_paths_csv(str(path), grid, batch, limit=2)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "path_id,t,value,measure"
    assert all(ln.endswith(",Q") for ln in lines[1:])
    # starts at the batch's start node, value one
    row = lines[1].split(",")
    assert float(row[1]) == grid.nodes[1]
    assert float(row[2]) == 1.0


def test_boundary_csv_comment_header_tolerates_blank_lines(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("# model_hash=deadbeef\n# seed=3\n\nt,yhat,residual,residual_se,iters\n"
                 "0,1,0,0,5\n0.5,0.75,0,0,6\n")
    b = read_boundary_csv(str(p))
    assert b.model_hash == "deadbeef"
    assert b.seed == 3
    assert np.allclose(b.yhat, [1.0, 0.75])
    assert list(b.iters) == [5, 6]
