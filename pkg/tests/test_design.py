import math

import numpy as np
import pytest
import fastcore.test as ft

from robeam.design import (
    BeamformingDesign,
    MethodTag,
    eve_rates,
    extract_beamformer,
    harvested_power,
    ir_rate,
    make_design,
    null_design,
    secrecy_rate_exact,
    secrecy_rate_relaxed,
)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.mark.parametrize(
    "value, tag",
    [("bti", MethodTag.BTI), ("SProcedure", MethodTag.SPROCEDURE), ("s-procedure", MethodTag.SPROCEDURE),
     ("LDI", MethodTag.LDI), ("NonRobust", MethodTag.NONROBUST), ("mrt", MethodTag.MRT), (MethodTag.LDI, MethodTag.LDI)],
)
def test_method_tag_parse(value, tag):
    ft.test_eq(MethodTag.parse(value), tag)


def test_method_tag():
    ft.test_fail(lambda: MethodTag.parse("sdr"), contains="unknown method")
    ft.test_eq(str(MethodTag.SPROCEDURE), "sproc")
    assert MethodTag.BTI.is_robust and not MethodTag.NONROBUST.is_robust and not MethodTag.MRT.is_robust


def test_extract_rank_one(rng):
    u = crandn(rng, 4)
    u /= np.linalg.norm(u)
    b, ratio = extract_beamformer(3 * np.outer(u, u.conj()))
    ft.test_close(np.outer(b, b.conj()), 3 * np.outer(u, u.conj()), eps=1e-12)
    ft.test_close(np.vdot(b, b).real, 3.0, eps=1e-12)
    assert ratio < 1e-12
    top = np.argmax(np.abs(b))
    ft.test_close(b[top].imag, 0.0, eps=1e-12)
    assert b[top].real > 0


def test_extract_full_rank():
    b, ratio = extract_beamformer(np.diag([2.0, 1.0]))
    ft.test_close(ratio, 0.5, eps=1e-12)
    ft.test_close(np.abs(b), [math.sqrt(2), 0.0], eps=1e-12)
    assert not make_design(np.diag([2.0, 1.0]), "bti").is_rank_one


def test_extract_zero():
    b, ratio = extract_beamformer(np.zeros((3, 3)))
    ft.test_eq(b, np.zeros(3))
    ft.test_eq(ratio, 0.0)


def test_extract_rejects_non_hermitian():
    ft.test_fail(lambda: extract_beamformer(np.array([[1.0, 1.0], [0.0, 1.0]])), contains="not Hermitian")


def test_make_and_null_design(rng):
    X = crandn(rng, 3, 3)
    design = make_design(X @ X.conj().T, "ldi", status="Optimal", iterations=12)
    ft.test_close(design.power, np.trace(X @ X.conj().T).real, eps=1e-10)
    ft.test_eq(design.method, MethodTag.LDI)
    ft.test_eq(design.iterations, 12)
    assert design.feasible
    ft.test_close(np.vdot(design.b, design.b).real, np.linalg.eigvalsh(design.Q)[-1], eps=1e-10)

    null = null_design(3, "bti", "PrimalInfeasible", iterations=7)
    assert isinstance(null, BeamformingDesign)
    assert not null.feasible
    ft.test_eq(null.power, 0.0)
    ft.test_eq(null.Q, np.zeros((3, 3)))
    ft.test_eq(null.status, "PrimalInfeasible")


def test_secrecy_rate_examples():
    ft.test_eq(float(secrecy_rate_exact(np.zeros((2, 2)), np.ones(2), [np.ones((2, 1))], 1.0, 1.0)), 0.0)
    ft.test_close(secrecy_rate_exact(np.array([[3.0]]), np.array([1.0]), [np.zeros((1, 1))], 1.0, 1.0), 2.0, eps=1e-12)
    h = np.array([1.0, 1j])
    Q = np.outer(h, h.conj())
    ft.test_close(secrecy_rate_exact(Q, h, [h[:, None]], 1.0, 1.0), 0.0, eps=1e-12)
    ft.test_close(secrecy_rate_exact(Q, h, [], 1.0, 1.0), math.log2(5.0), eps=1e-12)


def test_worst_eve_sets_the_rate(rng):
    h, Hs = crandn(rng, 3), [crandn(rng, 3, 2) for _ in range(3)]
    Q = np.eye(3)
    worst = eve_rates(Q, Hs, 2.0).max()
    ft.test_close(secrecy_rate_exact(Q, h, Hs, 1.0, 2.0), max(ir_rate(Q, h, 1.0) - worst, 0.0), eps=1e-12)


def test_relaxed_rate_for_rank_one(rng):
    h, Hs = crandn(rng, 4), [crandn(rng, 4, 3), crandn(rng, 4, 2)]
    b = crandn(rng, 4)
    Q = 5 * np.outer(b, b.conj())
    ft.test_close(secrecy_rate_exact(Q, h, Hs, 1.0, 0.5), secrecy_rate_relaxed(Q, h, Hs, 1.0, 0.5), eps=1e-10)
    X = crandn(rng, 4, 4)
    full = X @ X.conj().T
    assert secrecy_rate_exact(full, h, Hs, 1.0, 0.5) <= secrecy_rate_relaxed(full, h, Hs, 1.0, 0.5) + 1e-12


def test_rate_monotone_along_h(rng):
    h = crandn(rng, 4)
    # Eve channels orthogonal to h
    basis = np.linalg.svd(h[None].conj())[2][1:].conj().T
    Hs = [basis @ crandn(rng, 3, 2)]
    X = crandn(rng, 4, 4)
    Q = X @ X.conj().T
    rates = [float(secrecy_rate_exact(Q + t * np.outer(h, h.conj()), h, Hs, 1.0, 1.0)) for t in (0.0, 0.5, 2.0)]
    assert rates[0] <= rates[1] <= rates[2]


def test_batched_rates(rng):
    Q = np.eye(2)
    h = crandn(rng, 5, 2)
    ft.test_eq(ir_rate(Q, h, 1.0).shape, (5,))
    Hs = [crandn(rng, 5, 2, 3), crandn(rng, 5, 2, 1)]
    ft.test_eq(eve_rates(Q, Hs, 1.0).shape, (5, 2))
    ft.test_close(eve_rates(Q, [Hs[1][0]], 1.0), [math.log2(1 + np.vdot(Hs[1][0], Hs[1][0]).real)], eps=1e-12)


def test_harvested_power():
    ft.test_close(harvested_power(np.diag([2.0, 0.0]), np.array([1.0, 0.0]), 1.0), 2.0, eps=1e-15)
    ft.test_close(harvested_power(np.diag([2.0, 0.0]), np.array([1.0, 0.0]), 0.5), 1.0, eps=1e-15)
    ft.test_eq(float(harvested_power(np.diag([2.0, 0.0]), np.array([0.0, 1.0]), 1.0)), 0.0)
    g = np.ones((3, 2, 2))
    ft.test_eq(harvested_power(np.eye(2), g, 1.0).shape, (3, 2))
