import math
import unittest

import numpy as np
import sympy as sp

from mqrk.methods import (RootChoice, Tableau, catalog, classical_counterpart, describe, get_method, method_ids,
                          verify_order_conditions)


class TestCatalog(unittest.TestCase):
    def test_ids(self):
        self.assertEqual(method_ids(), [
            'rk2', 'mq-rk2',
            'rk3-b1', 'mq-rk3-b1', 'rk3-b2a', 'mq-rk3-b2a', 'rk3-b2b', 'mq-rk3-b2b',
            'rk3-b3a', 'mq-rk3-b3a', 'rk3-b3b', 'mq-rk3-b3b', 'rk3-b4', 'mq-rk3-b4',
            'rk4-c1', 'mq-rk4-c1-plus', 'mq-rk4-c1-minus', 'rk4-c2', 'mq-rk4-c2-plus', 'mq-rk4-c2-minus',
        ])
        self.assertEqual([s.id for s in catalog()], method_ids())

    def test_unknown(self):
        with self.assertRaises(KeyError) as cm:
            get_method('rk5')

        self.assertIn('mq-rk4-c2-plus', str(cm.exception))

    def test_order_conditions(self):
        for spec in catalog():
            for name, residual in verify_order_conditions(spec):
                with self.subTest(method=spec.id, condition=name):
                    self.assertLess(abs(residual), 1e-13)

    def test_tableau_shape(self):
        for spec in catalog():
            with self.subTest(method=spec.id):
                s = spec.stages
                self.assertEqual(spec.a.shape, (s, s))
                self.assertEqual(spec.c[0], 0.0)
                np.testing.assert_allclose(spec.a.sum(axis=1), spec.c, atol=1e-15)
                np.testing.assert_array_equal(np.triu(spec.a), np.zeros((s, s)))

    def test_formal_order(self):
        for method_id, stages, order in (('rk2', 2, 2), ('mq-rk2', 2, 3), ('rk3-b4', 3, 3), ('mq-rk3-b4', 3, 4),
                                         ('rk4-c1', 4, 4), ('mq-rk4-c1-minus', 4, 5)):
            with self.subTest(method=method_id):
                spec = get_method(method_id)
                self.assertEqual((spec.stages, spec.formal_order), (stages, order))

    def test_ratios(self):
        with self.subTest('b2a'):
            self.assertAlmostEqual(get_method('mq-rk3-b2a').ratios[1], (-7 - math.sqrt(33)) / 4, places=14)

        with self.subTest('c2'):
            np.testing.assert_allclose(get_method('mq-rk4-c2-plus').ratios, [1.0, -1 / 6, 1 / 10])

        with self.subTest('exact'):
            self.assertEqual(get_method('mq-rk3-b3b').kappa, (-sp.Rational(1, 5),))

    def test_root_choice(self):
        self.assertIs(get_method('mq-rk4-c2-plus').root_choice, RootChoice.PLUS)
        self.assertIs(get_method('mq-rk4-c2-minus').root_choice, RootChoice.MINUS)
        self.assertIs(get_method('mq-rk3-b4').root_choice, RootChoice.NONE)

    def test_classical_counterpart(self):
        for method_id, expected in (('mq-rk2', 'rk2'), ('mq-rk3-b2b', 'rk3-b2b'), ('mq-rk4-c2-minus', 'rk4-c2'),
                                    ('rk3-b1', 'rk3-b1')):
            with self.subTest(method=method_id):
                counterpart = classical_counterpart(get_method(method_id))
                self.assertEqual(counterpart.id, expected)
                self.assertTrue(counterpart.classical)
                self.assertIs(counterpart.tableau, get_method(method_id).tableau)

    def test_describe(self):
        self.assertEqual(describe(get_method('rk2')), 'rk2\t2\t2\t-')
        self.assertEqual(describe(get_method('mq-rk3-b4')), 'mq-rk3-b4\t3\t4\tk3=-1/3')


class TestTableau(unittest.TestCase):
    def test_from_rows(self):
        tableau = Tableau.from_rows(c=[sp.Rational(1, 2)], a=[[sp.Rational(1, 2)]], w=[0, 1])
        self.assertEqual(tableau.stages, 2)
        self.assertEqual(tableau.a[1][0], sp.Rational(1, 2))

    def test_inconsistent(self):
        with self.assertRaises(ValueError):
            Tableau.from_rows(c=[1], a=[[1]], w=[1])

        with self.assertRaises(ValueError):
            Tableau.from_rows(c=[1, 1], a=[[1], [1]], w=[0.5, 0.25, 0.25])
