"""Counter-based random streams for the cohort simulator.

Every person owns a fixed block of uniforms determined only by
``(seed, replicate, person index)``:

* the replicate key is ``SeedSequence([seed, replicate]).generate_state(2, uint64)``;
* a Philox-4x64 generator with that key emits uint64 words in counter order,
  each converted to a double by ``Generator.random``;
* person ``i`` owns words ``[i * width, (i + 1) * width)`` where
  ``width = draws_per_person(horizon)``.

Because ``width`` is a multiple of four (one Philox block), the stream for
persons ``[a, b)`` is reached with ``Philox.advance(a * width // 4)``, so any
partition of the cohort into chunks reproduces the same draws.

Column layout for horizon ``H``::

    0             baseline covariate C
    1 .. H        initiation draw for periods 0 .. H-1
    H+1 .. 2H     event draw for periods 0 .. H-1
    2H+1          pseudo-history draw (impossible intervention)
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

COL_C = 0


def col_init(t: int) -> int:
    return 1 + t


def col_event(t: int, horizon: int) -> int:
    return 1 + horizon + t


def col_pseudo(horizon: int) -> int:
    return 1 + 2 * horizon


def draws_per_person(horizon: int) -> int:
    used = 2 * horizon + 2
    return -(-used // 4) * 4


def replicate_key(seed: int, replicate: int) -> np.ndarray:
    if seed < 0 or replicate < 0:
        raise ValueError("seed and replicate must be nonnegative integers")
    return np.random.SeedSequence([seed, replicate]).generate_state(2, np.uint64)


def person_uniforms(seed: int, replicate: int, start: int, stop: int, horizon: int) -> np.ndarray:
    """Uniform block for persons ``start .. stop-1`` of one replicate."""
    width = draws_per_person(horizon)
    bitgen = np.random.Philox(key=replicate_key(seed, replicate))
    if start:
        bitgen.advance(int(start) * width // 4)
    return np.random.Generator(bitgen).random((stop - start, width))


def cohort_uniforms(seed: int, replicate: int, n: int, horizon: int, workers: int = 1) -> np.ndarray:
    """Uniforms for a whole cohort, optionally generated in parallel chunks."""
    if workers <= 1 or n < 2 * workers:
        return person_uniforms(seed, replicate, 0, n, horizon)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(
            lambda ab: person_uniforms(seed, replicate, int(ab[0]), int(ab[1]), horizon),
            zip(bounds[:-1], bounds[1:]),
        )
        return np.concatenate(list(parts))
