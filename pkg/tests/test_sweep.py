import json
import os
import subprocess
import sys
from math import comb

import numpy as np
import pytest

from seldoor import sweep
from seldoor.adjust import AdjustmentQuery, identify
from seldoor.graph import (
    backdoor_criterion,
    blocks_all_paths,
    partition_s1_s2,
    selective_door_criterion,
    single_door_criterion,
)
from seldoor.sweep import GraphSpec, enumerate_graphs, graph_queries, replay_model, run_sweep


def expected_count(n, max_dir=8, max_bi=2):
    p = comb(n, 2)
    return sum(comb(p, k) for k in range(min(p, max_dir) + 1)) * sum(
        comb(p, k) for k in range(min(p, max_bi) + 1)
    )


def test_enumeration_counts():
    specs = list(enumerate_graphs(4))
    assert len(specs) == sum(expected_count(n) for n in range(2, 5))
    assert [s.gid for s in specs] == list(range(len(specs)))
    assert len({(s.n, s.directed, s.bidirected) for s in specs}) == len(specs)
    assert expected_count(5) == 1013 * 56


def test_graph_queries_match_graph_layer():
    specs = list(enumerate_graphs(4))
    rng = np.random.default_rng(0)
    for k in rng.choice(len(specs), 60, replace=False):
        spec = specs[k]
        g = spec.admg()
        qi, qj, qz, flags, s1 = graph_queries(*g.masks(), g.n)
        assert len(qi) == g.n * (g.n - 1) * 2 ** (g.n - 2)
        for i, j, z, f, m in zip(qi, qj, qz, flags, s1):
            z = g.unmask(int(z))
            assert bool(f & sweep.SD) == selective_door_criterion(g, z, j, i).satisfied
            assert bool(f & sweep.SD_STRICT) == selective_door_criterion(g, z, j, i, strict=True).satisfied
            assert bool(f & sweep.BD) == backdoor_criterion(g, z, j, i).satisfied
            assert bool(f & sweep.ZERO) == blocks_all_paths(g, z, j, i)[0]
            assert bool(f & sweep.SINGLE_DOOR) == single_door_criterion(g, z, j, i).satisfied
            assert g.unmask(int(m)) == partition_s1_s2(g, z | {j}, i).s1


def test_small_sweep_is_clean():
    rep = run_sweep(max_vertices=3, exact_draws=5, necessity_draws=40)
    assert rep.graphs == sum(expected_count(n) for n in (2, 3))
    assert rep.stat(sweep.SOUND_CHECKED) > 0 and rep.stat(sweep.SOUND_FAILED) == 0
    assert rep.stat(sweep.BIAS_FAILED) == 0
    assert rep.stat(sweep.ZERO_FAILED) == rep.stat(sweep.SINGLE_FAILED) == rep.stat(sweep.BACKDOOR_FAILED) == 0
    assert rep.equivalence_mismatched == 0 and rep.effect_mismatched == 0
    assert rep.regression_gap < 1e-9
    assert rep.backdoor_not_selective == 0 and rep.selective_j_in_s1 == 0


def test_numeric_kernel_matches_reference_path():
    spec = GraphSpec(0, 4, ((0, 1), (0, 2), (1, 2), (1, 3), (2, 3)), ((0, 3),))
    g = spec.admg()
    rep = run_sweep(exact_draws=3, necessity_draws=3, graphs=[spec])
    assert rep.stat(sweep.SOUND_FAILED) == 0
    # every query, every draw, through the slow reference layer
    for d in range(3):
        m = replay_model(spec, d, draws=3)
        qi, qj, qz, flags, _ = graph_queries(*g.masks(), g.n)
        for i, j, z, f in zip(qi, qj, qz, flags):
            r = identify(m, AdjustmentQuery(int(i), int(j), g.unmask(int(z))))
            assert r.criterion.satisfied == bool(f & sweep.SD)


def test_agreement_records_replay():
    specs = {s.gid: s for s in enumerate_graphs(3)}
    rep = run_sweep(max_vertices=3, exact_draws=2, necessity_draws=50, tol_eq=0.05)
    assert rep.agreements, "a loose tolerance should log some agreements"
    for rec in rep.agreements[:20]:
        m = replay_model(specs[rec.gid], rec.draw, draws=50)
        r = identify(m, AdjustmentQuery(rec.outcome, rec.treatment, m.graph.unmask(rec.zmask)))
        assert not r.criterion.satisfied
        assert abs(r.gamma) <= 0.05


FALLBACK_SCRIPT = r"""
import json
from seldoor._accel import BACKEND
from seldoor.sweep import run_sweep
r = run_sweep(max_vertices=3, exact_draws=4, necessity_draws=12)
print(json.dumps({"backend": BACKEND, "stats": r.stats.tolist(), "agree": len(r.agreements),
                  "eq": [r.equivalence_checked, r.equivalence_mismatched],
                  "eff": [r.effect_checked, r.effect_mismatched], "reg": r.regression_gap}))
"""


def run_backend(disable):
    env = dict(os.environ, SELDOOR_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", FALLBACK_SCRIPT], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_python_fallback_matches_numba():
    fast, slow = run_backend(False), run_backend(True)
    assert fast["backend"] == "numba" and slow["backend"] == "python"
    counts = [k for k in range(sweep.N_STATS) if k not in sweep._MAXED]
    assert [fast["stats"][k] for k in counts] == [slow["stats"][k] for k in counts]
    for k in sweep._MAXED:
        assert slow["stats"][k] == pytest.approx(fast["stats"][k], abs=1e-13)
    assert fast["eq"] == slow["eq"] and fast["eff"] == slow["eff"]
    assert fast["agree"] == slow["agree"]
