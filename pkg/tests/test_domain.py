import numpy as np
import pytest

from demix.core.exceptions import InputError
from demix.models.domain import (
    Components,
    DemixProblem,
    HyperCube,
    OracleModel,
    SolveTrace,
    column_support,
    normalize_columns,
    oracle_match,
)
from demix.models.schemas import DictionarySpec, SolverConfig, SparsityMode
from demix.services.synthetic import gen_columnwise_instance


def test_problem_requires_unit_columns(rng):
    dictionary = rng.standard_normal((5, 3)) * 2.0
    with pytest.raises(InputError, match="unit norm"):
        DemixProblem(m_obs=np.ones((5, 4)), dictionary=dictionary, mode=SparsityMode.ENTRY_WISE)

    problem = DemixProblem.create(np.ones((5, 4)), dictionary, "entry")
    assert np.allclose(np.linalg.norm(problem.dictionary, axis=0), 1.0)
    assert (problem.n, problem.m, problem.d) == (5, 4, 3)
    assert problem.mode is SparsityMode.ENTRY_WISE


def test_problem_rejects_dimension_mismatch():
    with pytest.raises(InputError, match="dimension mismatch"):
        DemixProblem.create(np.ones((5, 4)), np.eye(4), SparsityMode.ENTRY_WISE)


def test_zero_dictionary_column_is_rejected():
    dictionary = np.eye(3)
    dictionary[:, 1] = 0.0
    with pytest.raises(InputError, match="zero dictionary column"):
        normalize_columns(dictionary)


def test_components_shapes_must_agree():
    with pytest.raises(InputError):
        Components(low_rank=np.zeros((3, 4)), sparse_coeff=np.zeros((2, 5)))


def test_component_support_sizes():
    sparse = np.zeros((3, 4))
    sparse[0, 1] = 1.0
    sparse[2, 1] = -1.0
    sparse[1, 3] = 1e-4
    found = Components(low_rank=np.zeros((2, 4)), sparse_coeff=sparse)
    assert found.entry_support_size() == 3
    assert found.column_support_size() == 2
    assert found.column_support_size(1e-3) == 1


def test_column_support():
    s = np.array([[0.0, 3.0, 0.001], [0.0, 4.0, 0.0]])
    assert column_support(s).tolist() == [1, 2]
    assert column_support(s, 0.01).tolist() == [1]
    with pytest.raises(InputError):
        column_support(s, -1.0)


def test_oracle_model_validation():
    with pytest.raises(InputError, match="orthonormal"):
        OracleModel(column_space_basis=np.ones((3, 1)), outlier_columns=(), m=4)
    with pytest.raises(InputError, match="increasing"):
        OracleModel(column_space_basis=np.eye(3)[:, :1], outlier_columns=(2, 1), m=4)

    oracle = OracleModel(column_space_basis=np.eye(3)[:, :1], outlier_columns=(1, 3), m=5)
    assert oracle.rank == 1
    assert oracle.inlier_columns().tolist() == [0, 2, 4]


def test_oracle_match_accepts_the_planted_pair():
    _, oracle, truth = gen_columnwise_instance(12, 20, 6, 2, 4, seed=5)
    report = oracle_match(truth, oracle)
    assert report.matched
    assert report.max_angle < 1e-8
    assert report.message == "match"


def test_oracle_match_flags_spurious_and_missing_columns():
    _, oracle, truth = gen_columnwise_instance(12, 20, 6, 2, 4, seed=5)
    sparse = truth.sparse_coeff.copy()
    sparse[:, 0] = 1.0
    sparse[:, 19] = 0.0
    report = oracle_match(Components(low_rank=truth.low_rank, sparse_coeff=sparse), oracle)
    assert not report.matched
    assert report.subspace_ok
    assert report.spurious == [0]
    assert report.missing == [19]


def test_oracle_match_reports_degenerate_low_rank_part():
    _, oracle, truth = gen_columnwise_instance(12, 20, 6, 2, 4, seed=5)
    found = Components(low_rank=np.zeros_like(truth.low_rank), sparse_coeff=truth.sparse_coeff)
    report = oracle_match(found, oracle)
    assert report.degenerate
    assert not report.matched


def test_oracle_from_components():
    _, oracle, truth = gen_columnwise_instance(10, 15, 5, 3, 5, seed=2)
    rebuilt = OracleModel.from_components(truth)
    assert rebuilt.outlier_columns == oracle.outlier_columns
    assert rebuilt.rank == 3


def test_solve_trace_frame():
    trace = SolveTrace()
    trace.append(3.0, 1.0, 0.5, 1.0)
    trace.append(2.0, 0.5, 0.25, 1.6)
    frame = trace.to_frame()
    assert list(frame.columns) == ["iteration", "objective", "residual", "nu", "t"]
    assert frame["iteration"].tolist() == [1, 2]
    assert len(trace) == 2


def test_hypercube_validation():
    with pytest.raises(InputError):
        HyperCube(voxels=np.zeros((3, 4)))
    with pytest.raises(InputError, match="label map"):
        HyperCube(voxels=np.zeros((3, 4, 5)), labels=np.zeros((5, 4), dtype=int))
    with pytest.raises(InputError):
        HyperCube(voxels=np.zeros((3, 4, 5)), labels=-np.ones((4, 5), dtype=int))
    cube = HyperCube(voxels=np.zeros((3, 4, 5)), labels=np.zeros((4, 5)))
    assert (cube.bands, cube.height, cube.width, cube.pixels) == (3, 4, 5, 20)
    assert np.issubdtype(cube.labels.dtype, np.integer)


def test_solver_config_from_settings_ignores_missing_overrides():
    config = SolverConfig.from_settings(0.1, max_iters=None, nu_floor=1e-3)
    assert config.lam == 0.1
    assert config.nu_floor == 1e-3
    assert config.max_iters >= 1


def test_dictionary_spec_validation():
    with pytest.raises(ValueError):
        DictionarySpec(source="sampled", class_id=1)
    with pytest.raises(ValueError):
        DictionarySpec(source="learned", class_id=1, atoms=4)
    with pytest.raises(ValueError):
        DictionarySpec(source="file")
    assert DictionarySpec(source="learned", class_id=1, atoms=4, rho=0.1).is_learned
