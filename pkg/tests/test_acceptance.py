"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``.
"""

import contextlib
import time

import numpy as np
import pytest

from oracles import advantages_oracle, lcs_recursive, region_reward_oracle, rouge_l_oracle
from tarpo_lab.advantage import GroupRewards, compute_advantages, normalize_group
from tarpo_lab.cli import cmd_train_sim
from tarpo_lab.config import RunConfig
from tarpo_lab.reward import RewardConfig, alpha_schedule, region_reward, rouge_l
from tarpo_lab.sim import SimConfig, TaskView, ToyPolicy, TrainConfig, generate_tasks, sample_group, train
from tarpo_lab.sim.training import group_surrogate
from tarpo_lab.table import TableRegion


@pytest.fixture
def verdict(capsys):
    """Context manager printing ``[AC n] PASS|FAIL name: detail`` straight to the terminal."""

    @contextlib.contextmanager
    def run(number, name):
        info = {}
        try:
            yield info
        except BaseException as exc:
            with capsys.disabled():
                print(f"\n[AC {number}] FAIL {name}: {exc!s:.200}")
            raise
        with capsys.disabled():
            print(f"\n[AC {number}] PASS {name}: {info.get('detail', '')}")

    return run


def test_ac1_decomposition_identity(verdict):
    with verdict(1, "advantage decomposition identity") as v:
        rng = np.random.default_rng(1)
        start = time.perf_counter()
        worst = 0.0
        for _ in range(10_000):
            g = int(rng.choice([2, 4, 16]))
            # Mix continuous region rewards, binary answers and exact ties.
            r_t = np.where(rng.random(g) < 0.2, 0.5, rng.random(g))
            r_a = (rng.random(g) < 0.5).astype(float)
            adv = normalize_group(GroupRewards(r_t, r_a, float(rng.random())))
            worst = max(worst, float(np.max(np.abs(adv.advantage - (adv.region_part + adv.answer_part)))))
        elapsed = time.perf_counter() - start
        assert worst <= 1e-9, f"max residual {worst:.3e}"
        assert elapsed < 5.0, f"took {elapsed:.2f}s"
        v["detail"] = f"max residual {worst:.1e}, {elapsed:.2f}s"


def test_ac1_oracle_spot_check():
    rng = np.random.default_rng(2)
    for _ in range(200):
        r_t, r_a, alpha = rng.random(4), (rng.random(4) < 0.5).astype(float), float(rng.random())
        adv = normalize_group(GroupRewards(r_t, r_a, alpha))
        if not adv.clamped and np.any(adv.advantage):
            np.testing.assert_allclose(adv.advantage, [e[0] for e in advantages_oracle(r_t, r_a, alpha)], atol=1e-9)


def test_ac2_region_reward_oracle(verdict):
    with verdict(2, "region reward vs set enumeration") as v:
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(10_000):
            n_cols, n_rows = int(rng.integers(1, 9)), int(rng.integers(1, 9))
            pc, gc = (tuple(np.flatnonzero(rng.random(n_cols) < 0.5)) for _ in range(2))
            pr, gr = (tuple(np.flatnonzero(rng.random(n_rows) < 0.5)) for _ in range(2))
            got = region_reward(TableRegion(pc, pr), TableRegion(gc, gr))
            worst = max(worst, abs(got - region_reward_oracle(pc, pr, gc, gr, n_cols, n_rows)))
        assert worst <= 1e-12, f"max error {worst:.3e}"
        v["detail"] = f"max error {worst:.1e} over 10^4 pairs"


def test_ac3_alpha_schedule(verdict):
    with verdict(3, "region weight schedule") as v:
        cfg = RewardConfig()
        assert alpha_schedule(0, cfg) == 0.3
        values = [alpha_schedule(t, cfg) for t in range(0, 3001)]
        assert all(a > b for a, b in zip(values, values[1:])), "not strictly decreasing"
        assert abs(alpha_schedule(770, cfg) - 0.15) <= 1e-3
        v["detail"] = f"alpha(0)=0.3, alpha(770)={alpha_schedule(770, cfg):.6f}"


def test_ac4_penalty_laws(verdict):
    with verdict(4, "consistency penalty laws") as v:
        rng = np.random.default_rng(4)
        inconsistent_seen = 0
        for _ in range(5_000):
            g = int(rng.choice([2, 4, 16]))
            r_t, r_a = rng.random(g), (rng.random(g) < 0.5).astype(float)
            rewards = GroupRewards(r_t, r_a, float(rng.random()))
            adv = compute_advantages(rewards, lam=0.1)
            bad = (r_t - r_t.mean()) * (r_a - r_a.mean()) < 0
            inconsistent_seen += int(bad.sum())
            assert np.all(adv.penalty[~bad] == 0.0)
            assert np.all(adv.penalty[bad] >= 0.0)
            assert np.all(adv.effective[bad] <= adv.advantage[bad])
        assert inconsistent_seen > 1000
        worst_small_alpha = 0.0
        previous = np.inf
        for alpha in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
            peak = 0.0
            for _ in range(200):
                r_t, r_a = rng.random(8), np.array([1.0, 0.0] * 4)
                peak = max(peak, float(compute_advantages(GroupRewards(r_t, r_a, alpha), 0.1).penalty.max()))
            assert peak < previous
            previous = worst_small_alpha = peak
        assert worst_small_alpha < 1e-5
        v["detail"] = f"{inconsistent_seen} inconsistent rollouts, max P at alpha=1e-6: {worst_small_alpha:.1e}"


def test_ac5_grpo_collapse(verdict):
    with verdict(5, "TARPO(gamma=0, lambda=0) equals GRPO") as v:
        base = dict(steps=10, n_tasks=100, eval_every=5)
        for seed in (0, 1, 2):
            grpo, p1 = train(TrainConfig(algorithm="grpo", seed=seed, **base))
            flat, p2 = train(TrainConfig(algorithm="tarpo", seed=seed, reward=RewardConfig(gamma=0.0, lam=0.0), **base))
            assert np.array_equal(p1.params, p2.params), f"seed {seed}: parameters differ"
            assert grpo.step_records() == flat.step_records(), f"seed {seed}: trajectories differ"
            assert grpo.summary == flat.summary
        v["detail"] = "bit-identical over seeds 0, 1, 2"


@pytest.mark.parametrize("beta", [0.0, 0.001])
def test_ac6_gradient_check(verdict, beta):
    with verdict(6, f"objective gradient vs finite differences (beta={beta})") as v:
        sim = SimConfig()
        reward = RewardConfig(beta=beta)
        tasks = generate_tasks(11, 20)
        rng = np.random.default_rng(6)
        worst = 0.0
        for point in range(20):
            view = TaskView(tasks[point], sim)
            policy = ToyPolicy(rng.normal(scale=0.5, size=sim.n_params), rng.normal(scale=0.5, size=sim.n_params))
            outs = sample_group(policy, view, 16, rng)
            choices = np.array([o.choices for o in outs])
            logp_old = np.array([o.logp_old for o in outs])
            a_eff = rng.normal(size=16)
            theta = policy.params + rng.normal(scale=0.03, size=sim.n_params)
            _, grad = group_surrogate(policy, theta, view, choices, a_eff, logp_old, reward)
            h = 1e-6
            fd = np.array([
                (group_surrogate(policy, theta + h * e, view, choices, a_eff, logp_old, reward)[0]
                 - group_surrogate(policy, theta - h * e, view, choices, a_eff, logp_old, reward)[0]) / (2 * h)
                for e in np.eye(sim.n_params)
            ])
            rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
            worst = max(worst, rel)
        assert worst <= 1e-4, f"worst relative error {worst:.3e}"
        v["detail"] = f"worst relative error {worst:.1e} over 20 points"


def test_ac7_rouge_l(verdict):
    with verdict(7, "Rouge-L vs LCS oracle") as v:
        rng = np.random.default_rng(7)
        vocab = np.array(["gold", "medal", "the", "a", "of", "team", "won", "silver"])
        worst = 0.0
        for _ in range(1_000):
            a = list(rng.choice(vocab, size=int(rng.integers(0, 12))))
            b = list(rng.choice(vocab, size=int(rng.integers(0, 12))))
            worst = max(worst, abs(rouge_l(" ".join(a), " ".join(b)) - rouge_l_oracle(a, b)))
        assert worst <= 1e-12, f"max error {worst:.3e}"
        assert lcs_recursive(["the", "gold", "medal"], ["gold", "medal"]) == 2
        score = rouge_l("the gold medal", "gold medal")
        assert abs(score - 0.8) <= 1e-15, score
        v["detail"] = f"max error {worst:.1e}; worked case = {score!r}"


def test_ac8_qualitative_ordering(verdict):
    with verdict(8, "TARPO vs GRPO ordering on 500 tasks x 5 seeds") as v:
        results, timings = {}, {}
        for algorithm in ("grpo", "tarpo-fixed", "tarpo"):
            start = time.perf_counter()
            runs = [train(TrainConfig(algorithm=algorithm, seed=s))[0].summary for s in range(5)]
            timings[algorithm] = time.perf_counter() - start
            results[algorithm] = {k: float(np.mean([r[k] for r in runs])) for k in ("val_acc", "mean_len")}
        for algorithm, seconds in timings.items():
            assert seconds <= 600, f"{algorithm} took {seconds:.0f}s"
        g, t = results["grpo"], results["tarpo"]
        assert t["val_acc"] >= g["val_acc"], f"val_acc tarpo {t['val_acc']:.4f} < grpo {g['val_acc']:.4f}"
        assert t["mean_len"] <= g["mean_len"], f"mean_len tarpo {t['mean_len']:.2f} > grpo {g['mean_len']:.2f}"
        v["detail"] = "; ".join(
            f"{a} acc={r['val_acc']:.3f} len={r['mean_len']:.1f} ({timings[a]:.0f}s)" for a, r in results.items()
        )


def test_ac9_determinism(verdict, tmp_path):
    with verdict(9, "byte-identical train-sim bodies") as v:
        cfg = RunConfig(TrainConfig(steps=20, n_tasks=100, eval_every=10), seeds=(3,))
        first = cmd_train_sim(cfg, tmp_path / "a")[3].read_bytes()
        second = cmd_train_sim(cfg, tmp_path / "b")[3].read_bytes()
        body = lambda raw: raw.split(b"\n", 1)[1]  # noqa: E731
        assert body(first) == body(second)
        v["detail"] = f"{len(body(first))} body bytes identical"
