import contextlib
import io
import json
import math
import pathlib
import tempfile
import unittest
import unittest.mock

from mqrk import cli, harness
from mqrk.methods import method_ids
from mqrk.problem import OdeProblem


def _singular():
    return OdeProblem('sing', lambda t, u: 1 / (t - 0.5), 0.0, [0.0], 1.0,
                      exact=lambda t: math.log(abs(t - 0.5)) - math.log(0.5))


class CliTestCase(unittest.TestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = pathlib.Path(tmp.name)

    def invoke(self, argv):
        stdout = io.StringIO()

        with contextlib.redirect_stdout(stdout):
            code = cli.run(cli.parse_args(argv))

        return code, stdout.getvalue()

    def assert_usage_error(self, argv):
        stderr = io.StringIO()

        with contextlib.redirect_stderr(stderr):
            with self.assertRaises(SystemExit) as cm:
                cli.parse_args(argv)

        self.assertEqual(cm.exception.code, cli.EXIT_USAGE)
        return stderr.getvalue()


class TestParseArgs(CliTestCase):
    def test_converge(self):
        config = cli.parse_args(['converge', '--method', 'mq-rk2', '--problem', 'eg1', '--steps', '20,40,80'])

        self.assertEqual(config.command, 'converge')
        self.assertEqual(config.method, 'mq-rk2')
        self.assertEqual(config.problem, 'eg1')
        self.assertEqual(config.steps, [20, 40, 80])
        self.assertEqual(config.format, 'csv')
        self.assertIsNone(config.out)

    def test_signed_values(self):
        config = cli.parse_args(['stability', '--method', 'rk2', '--window', '-3:1:-2:2', '--step', '0.5'])
        self.assertEqual(config.window, (-3.0, 1.0, -2.0, 2.0))
        self.assertEqual(config.step, 0.5)

        config = cli.parse_args(['shape', '--method', 'mq-rk2', '--problem', 'eg2', '--t', '-0.5', '--u', '-1.5'])
        self.assertEqual(config.t, -0.5)
        self.assertEqual(config.u, [-1.5])

        config = cli.parse_args(['local-order', '--method', 'rk2', '--problem', 'eg1', '--hs', '2^-2..2^-4'])
        self.assertEqual(config.hs, [0.25, 0.125, 0.0625])

    def test_out(self):
        config = cli.parse_args(['list-methods', '--out', str(self.tmp / 'methods.txt')])
        self.assertEqual(config.out, self.tmp / 'methods.txt')

        config = cli.parse_args(['list-methods', '--out', '-'])
        self.assertIsNone(config.out)

    def test_config_file(self):
        path = self.tmp / 'run.json'
        path.write_text(json.dumps({'method': 'rk2', 'problem': 'eg2', 'steps': [200, 400], 'format': 'json'}))

        config = cli.parse_args(['converge', '--config', str(path), '--method', 'mq-rk2'])

        self.assertEqual(config.method, 'mq-rk2')
        self.assertEqual(config.problem, 'eg2')
        self.assertEqual(config.steps, [200, 400])
        self.assertEqual(config.format, 'json')

        with self.subTest('unknown key'):
            path.write_text(json.dumps({'methd': 'rk2'}))
            self.assertIn('methd', self.assert_usage_error(['list-methods', '--config', str(path)]))

    def test_unknown_method(self):
        stderr = self.assert_usage_error(['converge', '--method', 'rk5', '--problem', 'eg1'])
        self.assertIn("unknown method 'rk5'", stderr)
        self.assertIn('mq-rk2', stderr)

    def test_unknown_problem(self):
        self.assertIn("unknown problem 'eg9'", self.assert_usage_error(['converge', '--method', 'rk2', '--problem', 'eg9']))

    def test_missing_option(self):
        self.assertIn('--problem', self.assert_usage_error(['converge', '--method', 'mq-rk2']))
        self.assertIn('--methods', self.assert_usage_error(['compare', '--problem', 'eg1']))

    def test_invalid_values(self):
        for argv in (['converge', '--method', 'rk2', '--problem', 'eg1', '--steps', '20,x'],
                     ['converge', '--method', 'rk2', '--problem', 'eg1', '--steps', '0'],
                     ['stability', '--method', 'rk2', '--window', '1:-3:-2:2'],
                     ['stability', '--method', 'rk2', '--step', '0'],
                     ['solve', '--method', 'rk2', '--problem', 'eg1', '--h', '-0.1'],
                     ['converge', '--method', 'rk2', '--problem', 'eg1', '--format', 'xml']):
            with self.subTest(argv=argv):
                self.assert_usage_error(argv)

    def test_unsupported_combinations(self):
        for argv, message in ((['energy', '--method', 'rk2', '--problem', 'eg1'], 'eg5'),
                              (['shape', '--method', 'mq-rk3-b4', '--problem', 'eg4'], 'scalar problems only'),
                              (['energy', '--method', 'mq-rk4-c2-plus'], 'scalar problems only'),
                              (['compare', '--methods', 'rk2,mq-rk3-b2a', '--problem', 'eg5'], 'scalar problems only'),
                              (['converge', '--method', 'rk2', '--problem', 'eg1', '--steps', '40,20'], 'increasing'),
                              (['local-order', '--method', 'rk2', '--problem', 'eg1', '--hs', '0.1'], '--hs')):
            with self.subTest(argv=argv):
                self.assertIn(message, self.assert_usage_error(argv))

        with self.subTest('classical methods run on systems'):
            config = cli.parse_args(['solve', '--method', 'rk4-c2', '--problem', 'eg4'])
            self.assertEqual(config.problem, 'eg4')

    def test_version(self):
        stdout = io.StringIO()

        with contextlib.redirect_stdout(stdout):
            with self.assertRaises(SystemExit) as cm:
                cli.main(['--version'])

        self.assertEqual(cm.exception.code, 0)
        self.assertTrue(stdout.getvalue().startswith('mqrk '))


class TestCommands(CliTestCase):
    def test_list_methods(self):
        code, stdout = self.invoke(['list-methods'])

        self.assertEqual(code, cli.EXIT_OK)
        lines = stdout.splitlines()
        self.assertEqual(lines[0], 'id\tstages\torder\tratios')
        self.assertEqual([line.split('\t')[0] for line in lines[1:]], method_ids())

    def test_converge(self):
        out = self.tmp / 'table.csv'
        code, _ = self.invoke(['converge', '--method', 'mq-rk2', '--problem', 'eg1', '--out', str(out)])

        self.assertEqual(code, cli.EXIT_OK)
        lines = out.read_text(encoding='utf-8').splitlines()
        self.assertEqual(len(lines), 6)
        self.assertEqual(lines[0], 'N,error,order')

        expected = [1.212e-6, 1.576e-7, 2.003e-8, 2.524e-9, 3.167e-10]

        for line, error in zip(lines[1:], expected):
            with self.subTest(row=line):
                self.assertAlmostEqual(float(line.split(',')[1]), error, delta=0.1 * error)

    def test_compare(self):
        code, stdout = self.invoke(['compare', '--methods', 'rk2,mq-rk2', '--problem', 'eg1', '--steps', '20,40',
                                    '--format', 'json'])

        self.assertEqual(code, cli.EXIT_OK)
        payload = json.loads(stdout)
        self.assertEqual(payload['problem'], 'eg1')
        self.assertEqual(payload['status'], 'ok')
        self.assertEqual([m['method'] for m in payload['methods']], ['rk2', 'mq-rk2'])
        self.assertEqual([r['N'] for r in payload['methods'][1]['rows']], [20, 40])

    def test_solve(self):
        out = self.tmp / 'trajectory.csv'
        code, _ = self.invoke(['solve', '--method', 'rk2', '--problem', 'eg1', '--steps', '4', '--out', str(out)])

        self.assertEqual(code, cli.EXIT_OK)
        lines = out.read_text(encoding='utf-8').splitlines()
        self.assertEqual(len(lines), 6)
        self.assertTrue(lines[-1].endswith(',final'))

    def test_solve_aborted(self):
        out = self.tmp / 'trajectory.csv'

        with unittest.mock.patch.dict(harness._REGISTRY, {'sing': _singular()}):
            with self.assertLogs('mqrk.cli', 'ERROR'):
                code, _ = self.invoke(['solve', '--method', 'rk2', '--problem', 'sing', '--steps', '2',
                                       '--out', str(out)])

        self.assertEqual(code, cli.EXIT_ABORTED)
        lines = out.read_text(encoding='utf-8').splitlines()
        self.assertTrue(lines[-1].endswith(',aborted'))

    def test_converge_aborted(self):
        with unittest.mock.patch.dict(harness._REGISTRY, {'sing': _singular()}):
            with self.assertLogs('mqrk.cli', 'ERROR'):
                code, stdout = self.invoke(['converge', '--method', 'rk2', '--problem', 'sing', '--steps', '1,2,4'])

        self.assertEqual(code, cli.EXIT_ABORTED)
        self.assertEqual(stdout.splitlines()[-1], '# status: aborted')

    def test_stability(self):
        out = self.tmp / 'region.csv'
        code, stdout = self.invoke(['stability', '--method', 'rk2', '--window', '-3:1:-2:2', '--step', '0.5',
                                    '--out', str(out)])

        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(len(out.read_text(encoding='utf-8').splitlines()), 1 + 81)
        self.assertIn('rk2,-2.000000', stdout)

    def test_shape(self):
        code, stdout = self.invoke(['shape', '--method', 'mq-rk4-c2-plus', '--problem', 'eg1', '--t', '0'])

        self.assertEqual(code, cli.EXIT_OK)
        lines = stdout.splitlines()
        self.assertEqual(lines[0], 'stage,eps_sq')
        self.assertEqual(len(lines), 5)
        self.assertAlmostEqual(float(lines[1].split(',')[1]), -4 + 2 * math.sqrt(23), places=12)
        self.assertEqual(lines[-1], '# status: optimal')

    def test_shape_json(self):
        code, stdout = self.invoke(['shape', '--method', 'mq-rk2', '--problem', 'eg4', '--format', 'json'])

        self.assertEqual(code, cli.EXIT_OK)
        payload = json.loads(stdout)
        self.assertEqual(payload['status'], 'optimal')
        self.assertEqual(payload['u'], [1.0, 0.0])
        self.assertEqual(payload['eps_sq'], [[12.0, 0.0]])

    def test_shape_wrong_dimension(self):
        self.assertEqual(cli.run(cli.parse_args(['shape', '--method', 'mq-rk2', '--problem', 'eg4', '--u', '1'])),
                         cli.EXIT_USAGE)

    def test_local_order(self):
        code, stdout = self.invoke(['local-order', '--method', 'mq-rk2', '--problem', 'eg1', '--hs', '2^-5..2^-10'])

        self.assertEqual(code, cli.EXIT_OK)
        header, row = stdout.splitlines()
        self.assertEqual(header, 'method,problem,slope')
        method, problem, slope = row.split(',')
        self.assertEqual((method, problem), ('mq-rk2', 'eg1'))
        self.assertAlmostEqual(float(slope), 4.0, delta=0.15)

    def test_internal_value_error_surfaces(self):
        config = cli.parse_args(['local-order', '--method', 'mq-rk2', '--problem', 'eg1'])

        with unittest.mock.patch.object(harness, 'local_order_probe', side_effect=ValueError('bad fit')):
            with self.assertRaisesRegex(ValueError, 'bad fit'):
                cli.run(config)

    def test_energy(self):
        out = self.tmp / 'energy.csv'
        code, _ = self.invoke(['energy', '--method', 'rk2', '--out', str(out)])

        self.assertEqual(code, cli.EXIT_OK)
        lines = out.read_text(encoding='utf-8').splitlines()
        self.assertEqual(lines[:2], ['t,E', '0,50'])
        self.assertEqual(len(lines), 1 + 333 + 1)
