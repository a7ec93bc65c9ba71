import csv
import io
import math
import unittest

import numpy as np
import sympy as sp

from mqrk.methods import catalog, get_method
from mqrk.stability import (B1_COEFFS, StabilityPolynomial, derive_stability_poly, evaluate, exp_match_order,
                            interval_ranking, rasterize_region, real_stability_interval, region_csv,
                            stability_polynomial, stability_polynomials)


ENDPOINTS = {
    'rk2': -2.0,
    'mq-rk2': -1.791807,
    'rk3-b4': -2.512745,
    'mq-rk3-b1': -1.914690,
    'mq-rk3-b2a': -2.822167,
    'mq-rk3-b2b': -2.219424,
    'mq-rk3-b3a': -2.520928,
    'mq-rk3-b3b': -2.643842,
    'mq-rk3-b4': -2.755179,
    'rk4-c2': -2.785294,
    'mq-rk4-c1-plus': -1.612267,
    'mq-rk4-c2-minus': -2.924091,
}


class TestPolynomials(unittest.TestCase):
    def test_classical(self):
        for method_id, coeffs in (('rk2', [1, 1, 1 / 2]), ('rk3-b2a', [1, 1, 1 / 2, 1 / 6]),
                                  ('rk4-c1', [1, 1, 1 / 2, 1 / 6, 1 / 24])):
            with self.subTest(method=method_id):
                np.testing.assert_allclose(derive_stability_poly(get_method(method_id)).coeffs, coeffs, atol=1e-15)

    def test_mq_rk2(self):
        poly = derive_stability_poly(get_method('mq-rk2'))
        self.assertEqual(poly.exact, (1, 1, sp.Rational(1, 2), sp.Rational(1, 6), sp.Rational(1, 9)))
        self.assertEqual(poly.claimed_order, 3)

    def test_tails(self):
        s33 = math.sqrt(33)
        c2_tail = [1 / 120, -37 / 21600, -1 / 540, -7 / 27000, -1 / 6750, -1 / 27000]
        expected = {
            'mq-rk3-b2b': [-(1 / 128 + s33 / 384), -(23 / 1152 + 11 * s33 / 3456), -(7 / 864 + s33 / 864)],
            'mq-rk3-b3a': [1 / 48, -1 / 864, -1 / 864],
            'mq-rk3-b3b': [-1 / 144, -5 / 288, -5 / 864],
            'mq-rk3-b4': [1 / 144, -1 / 144, -1 / 288],
            'mq-rk4-c2-plus': c2_tail,
            'mq-rk4-c2-minus': c2_tail,
            'mq-rk4-c1-plus': [1 / 120, -1763 / 17280, -209 / 4320, -1001 / 86400, 121 / 13824, 121 / 34560],
        }

        for method_id, tail in expected.items():
            with self.subTest(method=method_id):
                coeffs = derive_stability_poly(get_method(method_id)).coeffs
                np.testing.assert_allclose(coeffs[:5], [1, 1, 1 / 2, 1 / 6, 1 / 24], rtol=1e-12)
                np.testing.assert_allclose(coeffs[5:], tail, rtol=1e-12)

        with self.subTest(method='mq-rk3-b2a'):
            np.testing.assert_allclose(derive_stability_poly(get_method('mq-rk3-b2a')).coeffs[5:],
                                       [0.0071472986, -0.0016810795, -0.0014530525], atol=1e-9)

    def test_degree(self):
        for spec in catalog():
            if spec.id == 'mq-rk3-b1':
                continue

            with self.subTest(method=spec.id):
                expected = spec.stages if spec.classical else {2: 4, 3: 7, 4: 10}[spec.stages]
                self.assertEqual(derive_stability_poly(spec).degree, expected)

    def test_b1(self):
        with self.assertRaises(ValueError):
            derive_stability_poly(get_method('mq-rk3-b1'))

        poly = stability_polynomial(get_method('mq-rk3-b1'))
        np.testing.assert_array_equal(poly.coeffs, B1_COEFFS)
        self.assertIsNone(poly.exact)

    def test_all(self):
        polys = stability_polynomials()
        self.assertEqual(len(polys), 20)
        self.assertEqual(polys['mq-rk4-c2-plus'].method, 'mq-rk4-c2-plus')

    def test_invalid(self):
        with self.assertRaises(ValueError):
            StabilityPolynomial('p', [1.0], 0)

        with self.assertRaises(ValueError):
            StabilityPolynomial('p', [1.0, math.nan], 1)

    def test_evaluate(self):
        poly = derive_stability_poly(get_method('rk2'))
        self.assertEqual(evaluate(poly, -2.0), 1.0)
        np.testing.assert_allclose(poly(np.array([0.0, 1j])), [1.0, 0.5 + 1j])


class TestExpMatch(unittest.TestCase):
    def test_orders(self):
        polys = stability_polynomials()

        for method_id, poly in polys.items():
            spec = get_method(method_id)

            with self.subTest(method=method_id):
                if method_id == 'mq-rk3-b1':
                    self.assertEqual(exp_match_order(poly), 3)
                elif spec.classical:
                    self.assertEqual(exp_match_order(poly), spec.stages)
                else:
                    self.assertEqual(exp_match_order(poly), spec.stages + 1)


class TestInterval(unittest.TestCase):
    def test_endpoints(self):
        for method_id, endpoint in ENDPOINTS.items():
            with self.subTest(method=method_id):
                poly = stability_polynomial(get_method(method_id))
                self.assertAlmostEqual(real_stability_interval(poly), endpoint, delta=2e-6)

    def test_exact_endpoint(self):
        self.assertAlmostEqual(real_stability_interval(stability_polynomial(get_method('rk2'))), -2.0, delta=1e-9)

    def test_root_choice_invariant(self):
        for family in ('c1', 'c2'):
            with self.subTest(family=family):
                plus = stability_polynomial(get_method(f'mq-rk4-{family}-plus'))
                minus = stability_polynomial(get_method(f'mq-rk4-{family}-minus'))
                np.testing.assert_array_equal(plus.coeffs, minus.coeffs)

    def test_unbounded(self):
        with self.assertRaises(ValueError):
            real_stability_interval(StabilityPolynomial('damped', [1.0, 0.0], 1), limit=1.0)

    def test_ranking(self):
        three = interval_ranking(['mq-rk3-b1', 'mq-rk3-b2b', 'rk3-b4', 'mq-rk3-b3a', 'mq-rk3-b3b', 'mq-rk3-b4',
                                  'mq-rk3-b2a'])
        self.assertEqual([m for m, _ in three], ['mq-rk3-b2a', 'mq-rk3-b4', 'mq-rk3-b3b', 'mq-rk3-b3a', 'rk3-b4',
                                                 'mq-rk3-b2b', 'mq-rk3-b1'])

        four = interval_ranking(['mq-rk4-c1-plus', 'rk4-c2', 'mq-rk4-c2-plus'])
        self.assertEqual([m for m, _ in four], ['mq-rk4-c2-plus', 'rk4-c2', 'mq-rk4-c1-plus'])

        with self.subTest('near tie'):
            endpoints = dict(three)
            self.assertLess(abs(endpoints['mq-rk3-b3a'] - endpoints['rk3-b4']), 0.01)


class TestRegion(unittest.TestCase):
    def test_grid(self):
        grid = rasterize_region(stability_polynomial(get_method('rk2')), (-3.0, 1.0), (-2.0, 2.0), 0.5)

        self.assertEqual(len(grid.xs), 9)
        self.assertEqual(len(grid.ys), 9)
        self.assertEqual(grid.inside.shape, (9, 9))

        def inside(x, y):
            return bool(grid.inside[list(grid.ys).index(y), list(grid.xs).index(x)])

        self.assertTrue(inside(-1.0, 0.0))
        self.assertTrue(inside(0.0, 0.0))
        self.assertTrue(inside(-2.0, 0.0))
        self.assertFalse(inside(0.5, 0.0))
        self.assertFalse(inside(-3.0, 2.0))

    def test_area(self):
        grid = rasterize_region(stability_polynomial(get_method('rk2')), (-3.0, 1.0), (-2.0, 2.0), 0.05)
        self.assertGreater(grid.area, 0.0)
        self.assertLess(grid.area, 16.0)

        with self.subTest('larger for the mq variant of c2'):
            mq = rasterize_region(stability_polynomial(get_method('mq-rk4-c2-plus')), (-4.0, 1.0), (-4.0, 4.0), 0.05)
            classical = rasterize_region(stability_polynomial(get_method('rk4-c2')), (-4.0, 1.0), (-4.0, 4.0), 0.05)
            self.assertGreater(mq.inside[len(mq.ys) // 2].sum(), classical.inside[len(classical.ys) // 2].sum())

    def test_invalid(self):
        poly = stability_polynomial(get_method('rk2'))

        with self.assertRaises(ValueError):
            rasterize_region(poly, (-3.0, 1.0), (-2.0, 2.0), 0.0)

        with self.assertRaises(ValueError):
            rasterize_region(poly, (1.0, -3.0), (-2.0, 2.0), 0.5)

    def test_csv(self):
        grid = rasterize_region(stability_polynomial(get_method('rk2')), (-3.0, 1.0), (-2.0, 2.0), 0.5)
        rows = list(csv.reader(io.StringIO(region_csv(grid))))

        self.assertEqual(rows[0], ['x', 'y', 'inside'])
        self.assertEqual(len(rows), 1 + 81)
        self.assertEqual(rows[1], ['-3', '-2', '0'])
        self.assertIn(['-1', '0', '1'], rows)
