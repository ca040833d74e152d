from unittest import TestCase

import numpy as np
from genrl._core import policy as pol
from genrl._core.abstract_graph import GraphInstance, check_graph_satisfaction, compile_spec
from genrl._core.benchmarks import get_benchmark
from genrl._core.decision_tree import TreeLeaf, TreeSplit
from genrl._core.envs import EnvId, Environment
from genrl._core.spec_lang import avoid_rect, reach_ball
from genrl._core.spec_parser import parse_spec
from genrl.errors import ConsistencyError, InvalidInputError, NumericOverflowError

from tests.resources import specs_data


def small_shape(**kwargs) -> pol.PolicyShape:
    return pol.PolicyShape(input_dim=2, output_dim=2, hidden_dims=(3, 3), **kwargs)


def drive_right(shape: pol.PolicyShape) -> pol.PolicyParams:
    """Zero weights and an output bias that saturates the first action at +1."""
    flat = np.zeros(shape.n_params)
    flat[-shape.output_dim] = 10.0
    return pol.PolicyParams(flat=flat)


class TestPolicyShape(TestCase):
    def test_n_params__layer_sizes(self):
        self.assertEqual(29, small_shape().n_params)
        self.assertEqual(32, small_shape(include_task_index=True).n_params)

    def test_for_env__action_bounds(self):
        shape = pol.PolicyShape.for_env(Environment(id=EnvId.PENDULUM))
        self.assertEqual(3, shape.input_dim)
        self.assertEqual((-2.0,), shape.action_low)
        self.assertEqual((2.0,), shape.action_high)

    def test_shape__error__bad_bounds(self):
        with self.assertRaises(InvalidInputError):
            pol.PolicyShape(input_dim=2, output_dim=2, action_low=(0.0,), action_high=(1.0,))

    def test_flatten__inverts_unflatten(self):
        shape = small_shape()
        params = pol.initial_params(shape, np.random.default_rng(0))
        self.assertEqual(params, pol.flatten(pol.unflatten(shape, params)))

    def test_params__error__non_finite(self):
        with self.assertRaises(InvalidInputError):
            pol.PolicyParams(flat=np.array([0.0, np.inf]))


class TestPolicyAct(TestCase):
    def test_policy_act__zero_params_give_midpoint(self):
        """Should map a zero network output to the middle of the action bounds."""
        shape = pol.PolicyShape(
            input_dim=2, output_dim=1, hidden_dims=(2, 2), action_low=(0.0,), action_high=(2.0,)
        )
        params = pol.PolicyParams(flat=np.zeros(shape.n_params))
        np.testing.assert_allclose([1.0], pol.policy_act(params, shape, [0.3, -0.4]))

    def test_policy_act__batch(self):
        shape = small_shape()
        params = pol.initial_params(shape, np.random.default_rng(1))
        obs = np.random.default_rng(2).normal(size=(5, 2))
        batch = pol.policy_act(params, shape, obs)
        self.assertEqual((5, 2), batch.shape)
        np.testing.assert_allclose(batch[3], pol.policy_act(params, shape, obs[3]))
        self.assertTrue(np.all(np.abs(batch) <= 1.0))

    def test_policy_act__error__task_index(self):
        """Should need the task index exactly when the shape reads it."""
        plain, indexed = small_shape(), small_shape(include_task_index=True)
        cases = (
            lambda: pol.policy_act(pol.PolicyParams(np.zeros(29)), plain, [0, 0], i=1),
            lambda: pol.policy_act(pol.PolicyParams(np.zeros(32)), indexed, [0, 0]),
            lambda: pol.policy_act(pol.PolicyParams(np.zeros(29)), plain, [0, 0, 0]),
            lambda: pol.policy_act(pol.PolicyParams(np.zeros(30)), plain, [0, 0]),
        )
        for k, case in enumerate(cases):
            with self.subTest(k=k), self.assertRaises(InvalidInputError):
                case()


class TestKappa(TestCase):
    def test_unroll__affine(self):
        """Should apply 2 * theta + 1 three times to reach 7 from 0."""
        kappa = pol.KappaPolynomial(coefficients=np.array([[1.0], [2.0]]))
        out = pol.unroll_kappa(kappa, pol.PolicyParams(np.array([0.0])), 3)
        np.testing.assert_allclose([7.0], out.flat)

    def test_unroll__ok__scalar(self):
        """Should apply 3 * theta + 1 twice to reach 22 from 2."""
        kappa = pol.KappaPolynomial(coefficients=np.array([[1.0], [3.0]]))
        base = pol.PolicyParams(np.array([2.0]))
        np.testing.assert_allclose([7.0], pol.unroll_kappa(kappa, base, 1).flat)
        np.testing.assert_allclose([22.0], pol.unroll_kappa(kappa, base, 2).flat)

    def test_unroll__ok__flow(self):
        """Should reach i + j by unrolling j more steps from instance i."""
        rng = np.random.default_rng(8)
        base = pol.PolicyParams(rng.uniform(-1, 1, size=4))
        templates = ((pol.KappaTemplate.POLYNOMIAL, 2), (pol.KappaTemplate.CONSTANT, 0))
        for template, degree in templates:
            kappa = pol.init_kappa(4, degree, template, rng, scale=0.05)
            for i, j in ((0, 3), (2, 2), (4, 1), (3, 5)):
                with self.subTest(template=template, i=i, j=j):
                    later = pol.unroll_kappa(kappa, pol.unroll_kappa(kappa, base, i), j)
                    np.testing.assert_allclose(
                        pol.unroll_kappa(kappa, base, i + j).flat, later.flat, rtol=1e-12
                    )

    def test_unroll__constant_template(self):
        kappa = pol.KappaPolynomial(
            coefficients=np.array([[0.5, -1.0]]), template=pol.KappaTemplate.CONSTANT
        )
        out = pol.unroll_kappa(kappa, pol.PolicyParams(np.array([1.0, 1.0])), 4)
        np.testing.assert_allclose([3.0, -3.0], out.flat)

    def test_unroll__zero_and_identity(self):
        base = pol.PolicyParams(np.array([0.3, -2.0, 5.0]))
        kappa = pol.init_kappa(3, 2, pol.KappaTemplate.POLYNOMIAL, np.random.default_rng(0))
        self.assertEqual(base, pol.unroll_kappa(kappa, base, 0))
        self.assertEqual(base, pol.unroll_kappa(pol.identity_kappa(3), base, 9))

    def test_unroll__error__overflow(self):
        """Should name the first instance whose parameters stop being finite."""
        kappa = pol.KappaPolynomial(coefficients=np.array([[0.0], [0.0], [1.0]]))
        with self.assertRaises(NumericOverflowError) as err:
            pol.unroll_kappa(kappa, pol.PolicyParams(np.array([1e200])), 3)
        self.assertEqual(1, err.exception.instance_index)

    def test_unroll__error__size_mismatch(self):
        with self.assertRaises(InvalidInputError):
            pol.unroll_kappa(pol.identity_kappa(2), pol.PolicyParams(np.zeros(3)), 1)

    def test_init_kappa__near_identity(self):
        kappa = pol.init_kappa(4, 2, pol.KappaTemplate.POLYNOMIAL, np.random.default_rng(1))
        self.assertEqual((3, 4), kappa.coefficients.shape)
        np.testing.assert_allclose(np.ones(4), kappa.coefficients[1], atol=0.1)
        constant = pol.init_kappa(4, 2, pol.KappaTemplate.CONSTANT, np.random.default_rng(1))
        self.assertEqual(0, constant.degree)

    def test_kappa__error__constant_rows(self):
        with self.assertRaises(InvalidInputError):
            pol.KappaPolynomial(coefficients=np.zeros((2, 3)), template="constant")


class TestGeneratePolicy(TestCase):
    def setUp(self) -> None:
        self.graph = compile_spec(parse_spec(specs_data.choice, specs_data.symbols))
        self.shape = small_shape()
        base = pol.PolicyParams(np.zeros(self.shape.n_params))
        self.edges = {e: pol.EdgePolicy(base=base) for e in self.graph.edges}
        self.guard = TreeSplit(
            feature=0, threshold=4.5, left=TreeLeaf(label=(0, 1)), right=TreeLeaf(label=(0, 2))
        )

    def test_choose_path__follows_guard(self):
        for i, expected in ((3, [(0, 1), (1, 3)]), (7, [(0, 2), (2, 3)])):
            with self.subTest(i=i):
                path = pol.choose_path(self.graph, {0: self.guard}, np.array([float(i)]))
                self.assertEqual(expected, path)

    def test_choose_path__error__guards(self):
        """Should reject a missing guard and a guard choosing a foreign edge."""
        cases = ({}, {0: TreeLeaf(label=(1, 3))})
        for guards in cases:
            with self.subTest(guards=guards), self.assertRaises(ConsistencyError):
                pol.choose_path(self.graph, guards, np.array([0.0]))

    def test_generator__error__incomplete(self):
        with self.assertRaises(InvalidInputError):
            pol.PolicyGenerator(graph=self.graph, edges=self.edges, guards={}, shape=self.shape)
        with self.assertRaises(InvalidInputError):
            pol.PolicyGenerator(
                graph=self.graph, edges={}, guards={0: self.guard}, shape=self.shape
            )

    def test_generate_policy__unrolls_per_edge(self):
        kappa = pol.KappaPolynomial(coefficients=np.ones((1, self.shape.n_params)), template="constant")
        edges = dict(self.edges)
        edges[(0, 2)] = pol.EdgePolicy(base=edges[(0, 2)].base, kappa=kappa)
        gen = pol.PolicyGenerator(
            graph=self.graph, edges=edges, guards={0: self.guard}, shape=self.shape
        )
        pp = pol.generate_policy(gen, get_benchmark("choice"), 6)
        self.assertEqual(((0, 2), (2, 3)), pp.path)
        np.testing.assert_allclose(np.full(self.shape.n_params, 6.0), pp.params[0].flat)
        self.assertEqual([0, 2, 3], pp.vertices())

    def test_instance_features__env_mode(self):
        """Should list the initial mean and then the environment parameters."""
        task = get_benchmark("cartpole")
        feats = pol.instance_features(task, 2, pol.FeatureMode.ENV)
        np.testing.assert_allclose([0, 0, 0.08, 0, 1.2], feats, atol=1e-12)
        np.testing.assert_array_equal([2.0], pol.instance_features(task, 2, "index"))


class TestExecute(TestCase):
    def setUp(self) -> None:
        self.env = Environment(id=EnvId.CAR2D)
        self.shape = pol.PolicyShape.for_env(self.env, hidden_dims=(2, 2))
        self.params = drive_right(self.shape)

    def test_execute_edge__enters_and_counts_violations(self):
        """Should stop on entering the target and count unsafe states on the way."""
        out = pol.execute_edge_policy(
            self.params,
            self.shape,
            self.env,
            np.zeros((2, 2)),
            target=reach_ball((3.0, 0.0), 0.3),
            safety=(avoid_rect((1.5, -1.0), (2.5, 1.0)),),
            max_steps=10,
        )
        np.testing.assert_array_equal([True, True], out.entered)
        np.testing.assert_array_equal([3, 3], out.steps)
        np.testing.assert_array_equal([1, 1], out.violations)
        self.assertFalse(out.safe.any())

    def test_execute_edge__start_inside_target(self):
        out = pol.execute_edge_policy(
            self.params, self.shape, self.env, np.array([[3.0, 0.0]]),
            target=reach_ball((3.0, 0.0), 0.3), safety=(), max_steps=5,
        )
        self.assertTrue(out.entered[0])
        self.assertEqual(0, out.steps[0])

    def test_execute_edge__runs_out_of_steps(self):
        out = pol.execute_edge_policy(
            self.params, self.shape, self.env, np.array([[0.0, 0.0]]),
            target=reach_ball((0.0, 5.0), 0.3), safety=(), max_steps=4,
        )
        self.assertFalse(out.entered[0])
        self.assertEqual(4, out.steps[0])

    def test_execute_path__switches_edges(self):
        """Should hand over to the next edge policy when a region is entered."""
        graph = compile_spec(
            parse_spec("achieve reach(2, 0, 0.3) as a; achieve reach(4, 0, 0.3) as b")
        )
        inst = GraphInstance.of(graph)
        pp = pol.PathPolicy(
            path=((0, 1), (1, 2)), params=(self.params, self.params), shape=self.shape, index=0
        )
        rollout = pol.run_path_batch(pp, self.env, inst, np.zeros((1, 2)), max_steps=10)
        self.assertTrue(rollout.completed[0])
        traj = rollout.trajectory(0)
        self.assertEqual(5, len(traj))
        np.testing.assert_array_equal([0, 0, 1, 1], traj.edges)
        self.assertTrue(check_graph_satisfaction(inst, traj))

    def test_execute_path__error__bad_start(self):
        task = get_benchmark("reach_moving_init").base
        graph = compile_spec(task.spec)
        pp = pol.PathPolicy(path=((0, 1),), params=(self.params,), shape=self.shape, index=0)
        with self.assertRaises(InvalidInputError):
            pol.execute_path_policy(pp, task, GraphInstance.of(graph), 5, start=[0.0])
