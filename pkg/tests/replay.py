"""Literal attempt-by-attempt re-simulation used as a test oracle.

The production engine resolves each player's attempt loop in closed
form. This module replays the same per-level draw block through the
loop exactly as written: one attempt at a time, pass check before
learning increment before churn check. Tests compare the two paths
bit for bit on identical seeds.

Pure Python on purpose; do not import the production kernel here.
"""

import math

from churnsim.seeding import DOMAIN_LEVEL, substream

MAX_REPLAY_ATTEMPTS = 10**7  # test-side guard against runaway loops


def replay_player(s0, t, difficulty, gamma):
    """Run one player's attempt loop literally.

    Returns ("pass" | "churn", n_attempts).
    """
    s = s0
    n = 0
    while True:
        n += 1
        if n > MAX_REPLAY_ATTEMPTS:
            raise RuntimeError("replay did not terminate")
        if s >= difficulty:
            return "pass", n
        s += gamma
        if n > t:
            return "churn", n


def replay_level(attrs, difficulty, params, flags, rng):
    """Replay one level on raw attribute rows with an already-derived rng.

    Consumes the documented draw block: z = standard_normal((3, m))
    then u = random(m). Returns a dict with pass_rate, churn_rate,
    survivors (list of rows), evolved (list of rows), depleted.
    """
    m = len(attrs)
    z = rng.standard_normal((3, m))
    u = rng.random(m)
    alpha = 0.0 if flags.disable_draw_noise else params.alpha
    beta = 0.0 if flags.disable_draw_noise else params.beta
    gamma = 0.0 if flags.disable_learning else params.gamma

    pass_sum = 0.0
    n_churned = 0
    survivors = []
    for p in range(m):
        s0 = attrs[p][0] + alpha * z[0, p]
        t = math.inf if flags.disable_persistence else attrs[p][1] + beta * z[1, p]
        result, n = replay_player(s0, t, difficulty, gamma)
        if result == "pass":
            pass_sum += 1.0 / n
            churned = False
            if not flags.disable_boredom:
                b = params.theta * z[2, p]
                if b < attrs[p][2]:
                    churned = True
        else:
            churned = True
        if churned:
            n_churned += 1
        else:
            survivors.append([attrs[p][0], attrs[p][1], attrs[p][2]])

    k = len(survivors)
    evolved = [list(row) for row in survivors]
    if 0 < k < m:
        for i in range(m - k):
            src = min(int(u[i] * k), k - 1)
            evolved.append(list(evolved[src]))
    return {
        "pass_rate": pass_sum / m,
        "churn_rate": n_churned / m,
        "survivors": survivors,
        "evolved": evolved,
        "depleted": k == 0,
    }


def replay_simulate_level(attrs, difficulty, params, flags, seed):
    """Replay with the same stream a standalone simulate_level call uses."""
    return replay_level(attrs, difficulty, params, flags, substream(seed, DOMAIN_LEVEL))


def replay_progression(attrs, difficulties, params, flags, seed):
    """Replay a whole progression with per-level sub-streams.

    Returns (pass_rates, churn_rates, final_rows, depleted_at).
    """
    pass_rates = []
    churn_rates = []
    rows = [list(r) for r in attrs]
    depleted_at = None
    for i, d in enumerate(difficulties):
        res = replay_level(rows, d, params, flags, substream(seed, DOMAIN_LEVEL, i))
        pass_rates.append(res["pass_rate"])
        churn_rates.append(res["churn_rate"])
        rows = res["evolved"]
        if res["depleted"]:
            depleted_at = i
            break
    return pass_rates, churn_rates, rows, depleted_at
