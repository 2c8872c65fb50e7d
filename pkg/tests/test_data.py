import numpy as np
import pytest

from proxygml.data import (BatchSampler, Dataset, load_features, sample_batch, synthetic_clusters,
                           write_binary, write_csv)
from proxygml.errors import ParameterError, ParseError
from proxygml.model import make_rng


def nearest_center_accuracy(ds):
    x, y = ds.features, ds.labels
    d = ((x[:, None, :] - ds.centers[None]) ** 2).sum(axis=2)
    return float(np.mean(d.argmin(axis=1) == y))


def test_synthetic_zero_noise_collapses_classes():
    ds = synthetic_clusters(4, 6, 5, 0.0, seed=1)
    x, y = ds.split("test")
    xn = x / np.linalg.norm(x, axis=1, keepdims=True)
    sim = xn @ xn.T
    same = y[:, None] == y[None, :]
    assert np.allclose(sim[same], 1.0, atol=1e-12)


def test_synthetic_deterministic_and_split():
    a, b = synthetic_clusters(5, 8, 4, 0.2, seed=3), synthetic_clusters(5, 8, 4, 0.2, seed=3)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.is_test, b.is_test)
    for c in range(5):
        assert a.is_test[a.labels == c].sum() == 4
    assert not np.array_equal(a.features, synthetic_clusters(5, 8, 4, 0.2, seed=4).features)


def test_synthetic_nearest_center_oracle():
    assert nearest_center_accuracy(synthetic_clusters(10, 60, 32, 0.1, seed=0)) > 0.99


def test_synthetic_rejects_bad_args():
    with pytest.raises(ParameterError):
        synthetic_clusters(1, 10, 3, 0.1, seed=0)


def test_csv_minimal(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("label,f0,f1\n0,1.0,2.0\n1,3.0,4.0\n0,5.0,6.5\n")
    ds = load_features(p)
    assert len(ds.labels) == 3 and ds.class_count == 2
    assert ds.labels.tolist() == [0, 1, 0]
    assert ds.is_test.tolist() == [False, True, False]


def test_csv_string_labels_first_seen(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("label,f0\ncat,1\ndog,2\ncat,3\nemu,4\n")
    ds = load_features(p, test_classes=["dog"])
    assert ds.labels.tolist() == [0, 1, 0, 2]
    assert ds.class_names == ["cat", "dog", "emu"]
    assert ds.is_test.tolist() == [False, True, False, False]


def test_csv_integer_labels_reindexed(tmp_path):
    p = tmp_path / "i.csv"
    p.write_text("label,f0\n10,1\n3,2\n7,3\n3,4\n")
    assert load_features(p).labels.tolist() == [2, 0, 1, 0]


def test_csv_split_column(tmp_path):
    p = tmp_path / "sp.csv"
    p.write_text("label,split,f0\n0,train,1\n0,test,2\n1,train,3\n1,test,4\n")
    ds = load_features(p)
    assert ds.is_test.tolist() == [False, True, False, True]
    x, y = ds.split("test")
    assert x[:, 0].tolist() == [2.0, 4.0] and y.tolist() == [0, 1]


@pytest.mark.parametrize("body,needle", [
    ("label,f0\n0,1\n1,inf\n", "line 3"),
    ("label,f0\n0,1\n1,abc\n", "line 3"),
    ("lbl,f0\n0,1\n", "line 1"),
    ("label,f1\n0,1\n", "line 1"),
    ("label,f0,f1\n0,1\n", "line 2"),
    ("label,f0\n", "no data"),
])
def test_csv_parse_errors(tmp_path, body, needle):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(ParseError, match=needle):
        load_features(p)


def test_binary_roundtrip_bit_identical(tmp_path):
    ds = synthetic_clusters(4, 6, 7, 0.3, seed=2)
    write_binary(tmp_path / "a.pgml", ds)
    first = load_features(tmp_path / "a.pgml")
    assert np.array_equal(first.features, ds.features.astype(np.float32).astype(np.float64))
    write_binary(tmp_path / "b.pgml", first)
    second = load_features(tmp_path / "b.pgml")
    assert first.features.tobytes() == second.features.tobytes()
    assert (tmp_path / "a.pgml").read_bytes() == (tmp_path / "b.pgml").read_bytes()
    assert np.array_equal(second.labels, ds.labels)


def test_binary_errors(tmp_path):
    ds = synthetic_clusters(2, 4, 3, 0.1, seed=0)
    write_binary(tmp_path / "a.pgml", ds)
    blob = bytearray((tmp_path / "a.pgml").read_bytes())
    (tmp_path / "trunc.pgml").write_bytes(bytes(blob[:-3]))
    with pytest.raises(ParseError, match="offset 16"):
        load_features(tmp_path / "trunc.pgml")
    blob[16 + 4: 16 + 8] = np.array([np.inf], "<f4").tobytes()
    (tmp_path / "inf.pgml").write_bytes(bytes(blob))
    with pytest.raises(ParseError, match="record 0"):
        load_features(tmp_path / "inf.pgml")


def test_csv_roundtrip(tmp_path):
    ds = synthetic_clusters(3, 4, 2, 0.1, seed=5)
    write_csv(tmp_path / "r.csv", ds, with_split=True)
    back = load_features(tmp_path / "r.csv")
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.is_test, ds.is_test)


def test_dataset_validation():
    with pytest.raises(ParameterError):
        Dataset(np.array([[np.nan]]), [0], 1, [False])
    with pytest.raises(ParameterError):
        Dataset(np.zeros((2, 1)), [0, 2], 2, [False, True])


def test_train_test_disjoint():
    ds = synthetic_clusters(3, 10, 2, 0.1, seed=0)
    tr = set(np.flatnonzero(~ds.is_test))
    te = set(np.flatnonzero(ds.is_test))
    assert not tr & te and len(tr | te) == 30


def test_sampler_saturation_and_determinism():
    batches = BatchSampler(10, 10, make_rng(0)).epoch()
    assert len(batches) == 1 and sorted(batches[0].tolist()) == list(range(10))
    a = [b.tolist() for _ in range(3) for b in BatchSampler(50, 8, make_rng(9)).epoch()]
    b = [b.tolist() for _ in range(3) for b in BatchSampler(50, 8, make_rng(9)).epoch()]
    assert a == b


def test_sampler_epoch_coverage():
    sampler = BatchSampler(103, 10, make_rng(1))
    for _ in range(3):
        batches = sampler.epoch()
        flat = np.concatenate(batches)
        assert len(batches) == 10 and all(len(b) == 10 for b in batches)
        assert len(set(flat.tolist())) == len(flat) == 100


def test_sampler_keep_last():
    batches = BatchSampler(23, 10, make_rng(1), drop_last=False).epoch()
    assert [len(b) for b in batches] == [10, 10, 3]


def test_sample_batch():
    idx = sample_batch(20, 7, make_rng(0))
    assert len(set(idx.tolist())) == 7
    with pytest.raises(ParameterError):
        sample_batch(5, 6, make_rng(0))
    with pytest.raises(ParameterError):
        BatchSampler(5, 6, make_rng(0))
