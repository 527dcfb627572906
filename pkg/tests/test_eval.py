import numpy as np
import pytest

from vinp.enums import ReportFormat
from vinp.errors import ContractError, DatasetError
from vinp.eval.experiments import (
    evaluate_testset,
    extract_latent,
    interpolate_codes,
    interpolate_latent,
    linear_probe,
    noise_sweep,
    shuffled_probe_baseline,
    stratified_split,
)
from vinp.eval.metrics import complete_lowres, eval_lowres_path, reconstruction_error, upsampled_error
from vinp.eval.report import TABLE_HEADER, EvalReport, SampleScore, emit_report, format_table
from vinp.vox.grid import VoxelGrid


def grid(d, *cells):
    occ = np.zeros((d, d, d), dtype=bool)
    for c in cells:
        occ[c] = True
    return VoxelGrid(d, occ)


def score(sid, category, hybrid, noise=None, lrcn=None):
    return SampleScore(sid, category, "single_view_scan:+x:t=2", noise, 0.5, 0.25, hybrid, lrcn)


def test_reconstruction_error():
    assert reconstruction_error(grid(2, (0, 0, 0)), grid(2, (0, 0, 0))) == 0.0
    assert reconstruction_error(grid(2, (0, 0, 0)), grid(2, (1, 1, 1))) == 0.25
    with pytest.raises(ContractError):
        reconstruction_error(grid(2), grid(4))


def test_upsampled_error():
    low = grid(2, (0, 0, 0))
    high = grid(4, (0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), (0, 0, 1), (1, 0, 1), (0, 1, 1), (1, 1, 1))
    assert upsampled_error(low, high) == 0.0
    assert upsampled_error(grid(2), high) == 8 / 64
    with pytest.raises(ContractError):
        upsampled_error(grid(3), high)


def test_lowres_path(warm_model):
    x = grid(16, (8, 8, 8))
    truth = grid(32)
    err = eval_lowres_path(warm_model, x, truth)
    completed = complete_lowres(warm_model, x)
    assert err == pytest.approx(completed.count() * 8 / 32 ** 3)


def test_sample_score_bounds():
    with pytest.raises(ContractError):
        score("a", "box", 1.5)


def test_report_aggregates():
    report = EvalReport([score("a", "box", 0.1, 0.0), score("b", "box", 0.3, 0.0), score("c", "lamp", 0.6, 0.5)])
    assert report.mean("hybrid_error") == pytest.approx(1.0 / 3)
    assert report.by_category() == pytest.approx({"box": 0.2, "lamp": 0.6})
    assert list(report.by_noise()) == [0.0, 0.5]
    assert report.standard_errors()[0.5] == 0.0
    assert report.standard_errors()[0.0] == pytest.approx(0.1)
    assert report.win_rate() == pytest.approx(2 / 3)
    assert np.isnan(report.mean("lrcn_error"))
    with pytest.raises(DatasetError):
        EvalReport().win_rate()


def test_table_format(tmp_path):
    report = EvalReport([score("a", "box", 0.1, lrcn=0.2), score("b", "box", 0.3)])
    text = emit_report(report, ReportFormat.TABLE, tmp_path / "r.csv")
    lines = text.splitlines()
    assert lines[0] == ",".join(TABLE_HEADER)
    assert lines[1] == "a,box,single_view_scan:+x:t=2,,0.500000000,0.250000000,0.100000000,0.200000000"
    assert lines[2].endswith("0.300000000,")
    assert (tmp_path / "r.csv").read_text() == text
    assert emit_report(report) == text


def test_empty_table_is_header_only():
    assert format_table(EvalReport()) == ",".join(TABLE_HEADER) + "\n"


def test_text_format():
    report = EvalReport([score("a", "box", 0.1, 0.0), score("b", "lamp", 0.3, 0.2)])
    text = emit_report(report, ReportFormat.TEXT)
    assert text.startswith("samples 2\n")
    assert "category lamp hybrid_error 0.300000000" in text
    assert "noise 0.200000000 hybrid_error 0.300000000 stderr 0.000000000" in text


def test_evaluate_testset(warm_model, tiny_dataset):
    report = evaluate_testset(warm_model, tiny_dataset.test)
    assert [s.id for s in report.scores] == [s.id for s in tiny_dataset.test]
    assert all(s.lrcn_error is None and s.noise_fraction is None for s in report.scores)
    assert emit_report(evaluate_testset(warm_model, tiny_dataset.test)) == emit_report(report)
    with pytest.raises(DatasetError):
        evaluate_testset(warm_model, [])


def test_lrcn_only_column(warm_model, tiny_dataset):
    warm_model.lrcn_only = warm_model.lrcn_params.copy()
    report = evaluate_testset(warm_model, tiny_dataset.test)
    assert all(s.lrcn_error is not None for s in report.scores)


def test_noise_sweep(warm_model, tiny_dataset):
    report = noise_sweep(warm_model, tiny_dataset.test, [0.0, 0.5, 1.0], seed=2)
    assert len(report) == 3 * len(tiny_dataset.test)
    assert list(report.by_noise()) == [0.0, 0.5, 1.0]
    truth_counts = [s.load_clean_high().count() / 32 ** 3 for s in tiny_dataset.test]
    full_deletion = [s.input_error for s in report.scores if s.noise_fraction == 1.0]
    assert full_deletion == pytest.approx(truth_counts)
    with pytest.raises(ContractError):
        noise_sweep(warm_model, tiny_dataset.test, [0.5, 0.2])
    with pytest.raises(ContractError):
        noise_sweep(warm_model, tiny_dataset.test, [0.5, 1.2])


def test_interpolation_endpoints(warm_model):
    a = grid(16, (8, 8, 8), (8, 9, 8))
    b = grid(16, (3, 3, 3))
    z_a, z_b = extract_latent(warm_model, a), extract_latent(warm_model, b)
    codes = interpolate_codes(z_a, z_b, [1.0, 0.5, 0.0])
    np.testing.assert_array_equal(codes[0], z_a)
    np.testing.assert_array_equal(codes[2], z_b)
    np.testing.assert_allclose(codes[1], (z_a + z_b) / 2)
    grids = interpolate_latent(warm_model, a, b, [1.0, 0.0])
    assert grids[0] == complete_lowres(warm_model, a)
    assert grids[1] == complete_lowres(warm_model, b)
    assert grids[0].meta == "interpolate:gamma=1"
    with pytest.raises(ContractError):
        interpolate_codes(z_a, z_b, [1.5])


def clusters(n_per_class=25, seed=0):
    rng = np.random.default_rng(seed)
    features = np.concatenate([rng.normal(-3, 1, size=(n_per_class, 6)), rng.normal(3, 1, size=(n_per_class, 6))])
    labels = ["box"] * n_per_class + ["lamp"] * n_per_class
    return features, labels


def test_stratified_split_keeps_every_class_on_both_sides():
    labels = ["a"] * 6 + ["b"] * 5
    train, test = stratified_split(labels, seed=1)
    assert len(train) + len(test) == 11
    assert not set(train) & set(test)
    for cls in "ab":
        assert any(labels[i] == cls for i in train) and any(labels[i] == cls for i in test)


def test_probe_separates_clusters():
    features, labels = clusters()
    result = linear_probe(features, labels, seed=0)
    assert result.accuracy == 1.0
    assert result.classes == ("box", "lamp")
    assert result.n_train + result.n_test == 50
    assert shuffled_probe_baseline(features, labels, shuffles=10, seed=0) < 0.8


def test_probe_contracts():
    features, labels = clusters()
    with pytest.raises(ContractError):
        linear_probe(features, ["box"] * 50)
    with pytest.raises(ContractError):
        linear_probe(features[:29], labels[:29])
    with pytest.raises(ContractError):
        linear_probe(features[:10], labels)
