"""Seeded random instances: states, channels, instruments, chain processes.

Everything takes an explicit numpy Generator so tests stay reproducible.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from .channels import ChannelOperator, cj_from_kraus, input_signals
from .labeled import LabeledOperator, LinearMap, SystemLabel

__all__ = [
    "haar_unitary",
    "random_state",
    "random_pure_state",
    "random_cptp",
    "random_signalling_channel",
    "random_instrument_kraus",
]


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed d x d unitary matrix."""
    if d == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return unitary_group.rvs(d, random_state=rng)


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def random_state(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from the Ginibre ensemble (full rank by default)."""
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_cptp(d_in: int, d_out: int, rng: np.random.Generator, kraus_rank: int | None = None) -> list[np.ndarray]:
    """Kraus matrices of a random channel, via a Haar random Stinespring isometry."""
    r = kraus_rank if kraus_rank is not None else d_in
    u = haar_unitary(d_out * r, rng)
    v = u[:, :d_in]
    return [v[e * d_out : (e + 1) * d_out, :] for e in range(r)]


def random_signalling_channel(
    in_system: SystemLabel,
    out_system: SystemLabel,
    probe_input,
    rng: np.random.Generator,
    tol: float = 1e-6,
    max_tries: int = 50,
) -> ChannelOperator:
    """Random CPTP channel whose output demonstrably depends on probe_input.

    ``in_system`` may be a tuple of labels; ``probe_input`` names the one whose
    influence is required. Resamples until input_signals is clearly true.
    """
    ins = in_system if isinstance(in_system, tuple) else (in_system,)
    outs = out_system if isinstance(out_system, tuple) else (out_system,)
    d_in = int(np.prod([s.dim for s in ins]))
    d_out = int(np.prod([s.dim for s in outs]))
    for _ in range(max_tries):
        kraus = random_cptp(d_in, d_out, rng)
        ch = cj_from_kraus(kraus, ins, outs)
        if input_signals(ch, probe_input, tol):
            return ch
    raise RuntimeError("could not sample a signalling channel")


def random_instrument_kraus(
    d_in: int, d_out: int, n_outcomes: int, rng: np.random.Generator
) -> list[list[np.ndarray]]:
    """Kraus lists of instrument elements that sum to a CPTP channel.

    Draws a random channel with one Kraus operator per outcome and lets each
    outcome keep one of them.
    """
    kraus = random_cptp(d_in, d_out, rng, kraus_rank=n_outcomes)
    return [[k] for k in kraus]
