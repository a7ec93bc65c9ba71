import math
import unittest

import numpy as np

from mqrk import jet
from mqrk.errors import DomainError, UnsupportedFunction
from mqrk.jet import INDICES, SIZE, Jet4, jet_to_partials, lift, seed


class TestJet4(unittest.TestCase):
    def test_indices(self):
        self.assertEqual(len(INDICES), 15)
        self.assertEqual(INDICES[:6], ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)))

    def test_polynomial_partials(self):
        t, u = seed(1.0, 0.5)
        j = -4 * t ** 3 * u ** 2

        expected = {
            (0, 0): -1.0,       # -4 t^3 u^2
            (1, 0): -3.0,       # -12 t^2 u^2
            (0, 1): -4.0,       # -8 t^3 u
            (1, 1): -12.0,      # -24 t^2 u
            (2, 0): -6.0,       # -24 t u^2
            (0, 2): -8.0,       # -8 t^3
            (2, 1): -24.0,      # -48 t u
            (1, 2): -24.0,      # -24 t^2
            (3, 0): -6.0,       # -24 u^2
            (3, 1): -24.0,      # -48 u
            (2, 2): -48.0,
            (0, 3): 0.0,
        }

        for key, value in expected.items():
            with self.subTest(partial=key):
                self.assertAlmostEqual(j.partial(*key), value, places=12)

    def test_truncation(self):
        _, u = seed(0.0, 1.0)
        j = u ** 5
        self.assertAlmostEqual(j.partial(0, 4), 120.0, places=10)
        self.assertAlmostEqual(j.value, 1.0)

        with self.assertRaises(ValueError):
            j.coefficient(0, 5)

    def test_exp(self):
        t, u = seed(0.5, 2.0)
        j = jet.exp(t * u)
        e = math.e

        for key, value in {(0, 0): e, (1, 0): 2 * e, (0, 2): 0.25 * e, (1, 1): 2 * e, (2, 0): 4 * e}.items():
            with self.subTest(partial=key):
                self.assertAlmostEqual(j.partial(*key), value, places=12)

    def test_sqrt(self):
        _, u = seed(0.0, 4.0)
        j = jet.sqrt(u)

        for key, value in {(0, 0): 2.0, (0, 1): 0.25, (0, 2): -1 / 32, (0, 3): 3 / 256}.items():
            with self.subTest(partial=key):
                self.assertAlmostEqual(j.partial(*key), value, places=14)

    def test_division(self):
        _, u = seed(0.0, 2.0)

        with self.subTest('reciprocal'):
            self.assertAlmostEqual((1 / u).partial(0, 4), 0.75, places=14)

        with self.subTest('negative power'):
            self.assertAlmostEqual((u ** -2).partial(0, 1), -0.25, places=14)

        with self.subTest('quotient'):
            t, u = seed(1.0, 2.0)
            self.assertAlmostEqual((t / u).partial(1, 1), -0.25, places=14)

    def test_domain_errors(self):
        t, u = seed(0.0, 0.0)

        with self.subTest('division'):
            with self.assertRaises(DomainError) as cm:
                1 / u

            self.assertEqual(cm.exception.tag, 'div')

        with self.subTest('sqrt'):
            with self.assertRaises(DomainError) as cm:
                jet.sqrt(u - 1)

            self.assertEqual(cm.exception.tag, 'sqrt')

    def test_unsupported(self):
        t, u = seed(1.0, 2.0)

        with self.assertRaises(UnsupportedFunction):
            u ** 0.5

        with self.assertRaises(UnsupportedFunction):
            2 ** u

        with self.assertRaises(UnsupportedFunction):
            u ** t

        with self.assertRaises(UnsupportedFunction):
            np.sin(u)

    def test_numpy_interop(self):
        t, u = seed(0.0, 1.0)

        with self.subTest('scalar'):
            self.assertEqual(np.float64(2.0) * u, 2.0 * u)

        with self.subTest('ufunc'):
            self.assertEqual(np.exp(u), jet.exp(u))

        with self.subTest('floats pass through'):
            self.assertAlmostEqual(jet.exp(0.0), 1.0)
            self.assertAlmostEqual(jet.sqrt(9.0), 3.0)

    def test_constructors(self):
        self.assertEqual(Jet4.constant(3.0).value, 3.0)
        self.assertEqual(lift(3), Jet4.constant(3.0))

        with self.assertRaises(ValueError):
            Jet4([1.0, 2.0])

        with self.assertRaises(UnsupportedFunction):
            lift('3')

    def test_jet_to_partials(self):
        t, u = seed(1.0, 0.5)
        table = jet_to_partials(-4 * t ** 3 * u ** 2)
        self.assertEqual(table.f_tu, -12.0)
        self.assertEqual(table[(0, 2)], -8.0)


class TestAlgebra(unittest.TestCase):
    """
    Truncated products of random jets obey the ring axioms up to rounding.
    """
    TRIALS = 50

    def setUp(self):
        self.rng = np.random.default_rng(20240611)

    def random_jet(self, low=-1.0, high=1.0):
        coeffs = self.rng.uniform(-1.0, 1.0, SIZE)
        coeffs[0] = self.rng.uniform(low, high)
        return Jet4(coeffs)

    def assert_jets_close(self, actual, expected, atol=1e-12):
        np.testing.assert_allclose(actual.coeffs, expected.coeffs, rtol=1e-12, atol=atol)

    def test_ring_axioms(self):
        for trial in range(self.TRIALS):
            x, y, z = self.random_jet(), self.random_jet(), self.random_jet()

            with self.subTest(trial=trial, law='commutative'):
                self.assert_jets_close(x * y, y * x)
                self.assert_jets_close(x + y, y + x)

            with self.subTest(trial=trial, law='associative'):
                self.assert_jets_close((x * y) * z, x * (y * z))
                self.assert_jets_close((x + y) + z, x + (y + z))

            with self.subTest(trial=trial, law='distributive'):
                self.assert_jets_close(x * (y + z), x * y + x * z)

            with self.subTest(trial=trial, law='identity'):
                self.assert_jets_close(x * Jet4.constant(1.0), x)
                self.assert_jets_close(x - x, Jet4())

    def test_quotient(self):
        for trial in range(self.TRIALS):
            x, y = self.random_jet(), self.random_jet(1.0, 2.0)

            with self.subTest(trial=trial):
                self.assert_jets_close((x * y) / y, x, atol=1e-10)
                self.assert_jets_close(y * y.reciprocal(), Jet4.constant(1.0), atol=1e-10)

    def test_elementary_functions(self):
        for trial in range(self.TRIALS):
            x, y = self.random_jet(), self.random_jet(1.0, 2.0)

            with self.subTest(trial=trial, function='exp'):
                self.assert_jets_close(jet.exp(x + y), jet.exp(x) * jet.exp(y), atol=1e-10)

            with self.subTest(trial=trial, function='sqrt'):
                self.assert_jets_close(jet.sqrt(y) * jet.sqrt(y), y, atol=1e-10)
