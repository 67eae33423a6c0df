import json

import numpy as np
import pytest

from bmlearn.config import Config, load_config, override, write_config
from bmlearn.core import Distribution
from bmlearn.errors import ParameterError
from bmlearn.generators import GenSpec, generate, parity_class
from bmlearn.io import class_to_json, class_to_text, load_class, load_distribution, parse_class_text, save_class

from reference import ref_parity


def test_parity_2():
    cls, P = generate("parity:2")
    assert len(cls) == 4 and cls.domain_size == 4
    G = cls.gram(P)
    assert np.array_equal(G, np.eye(4))
    assert sorted(map(tuple, cls.matrix.tolist())) == sorted(map(tuple, ref_parity(2)))


def test_threshold_4():
    cls, _ = generate("threshold:4")
    assert cls.matrix.tolist() == [
        [-1, -1, -1, -1],
        [1, -1, -1, -1],
        [1, 1, -1, -1],
        [1, 1, 1, -1],
        [1, 1, 1, 1],
    ]


def test_sparse_parity():
    cls, P = generate("sparse_parity:4:2")
    assert len(cls) == 4 and cls.domain_size == 16
    # characters ignore bits 2 and 3: points x and x + 4 agree
    assert np.array_equal(cls.matrix[:, :4], cls.matrix[:, 4:8])
    assert np.array_equal(cls.gram(P), np.eye(4))


@pytest.mark.parametrize("n", range(1, 11))
def test_parity_orthogonal(n):
    cls = parity_class(n)
    G = cls.gram(Distribution.uniform(2**n))
    assert np.array_equal(G, np.eye(2**n))


def test_random_class_seeded():
    a, _ = generate("random:5:7:3")
    b, _ = generate("random:5:7:3")
    assert np.array_equal(a.matrix, b.matrix)


@pytest.mark.parametrize("bad", ["parity:0", "parity:15", "threshold:0", "bogus:1", "parity:2:3", "random:1:x:2"])
def test_bad_specs(bad):
    with pytest.raises(ParameterError):
        generate(bad)


def test_spec_string_round_trip():
    assert str(GenSpec.parse("sparse_parity:6:3")) == "sparse_parity:6:3"


def test_class_text_round_trip(tmp_path):
    cls, P = generate("threshold:5")
    path = tmp_path / "c.txt"
    save_class(path, cls, P)
    cls2, P2 = load_class(path)
    assert np.array_equal(cls.matrix, cls2.matrix)
    assert P2 == P
    cls3, P3 = parse_class_text(class_to_text(cls, P))
    assert np.array_equal(cls3.matrix, cls.matrix)


def test_class_text_zero_one_flag():
    text = "3 2 01\n0.2 0.3 0.5\n1 0 1\n0 0 1\n"
    cls, P = parse_class_text(text)
    assert cls.matrix.tolist() == [[1, -1, 1], [-1, -1, 1]]
    assert P.probs.tolist() == [0.2, 0.3, 0.5]


def test_class_json_round_trip(tmp_path):
    cls, P = generate("parity:2")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(class_to_json(cls, P)))
    cls2, P2 = load_class(path)
    assert np.array_equal(cls.matrix, cls2.matrix) and P2 == P


def test_load_distribution(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"probs": [0.25, 0.75]}))
    assert load_distribution(path).probs.tolist() == [0.25, 0.75]


def test_config_write_and_load(tmp_path):
    cfg = override(Config(), c0=0.5, kappa=7.0)
    path = tmp_path / "cfg.json"
    write_config(cfg, path, provenance={"c0": "test"})
    back = load_config(path)
    assert back.c0 == 0.5 and back.kappa == 7.0
    assert json.loads(path.read_text())["_provenance"]["c0"] == "test"


def test_frozen_constants_have_provenance():
    from bmlearn.config import default_config_path

    data = json.loads(default_config_path().read_text())
    assert {"c0", "kappa"} <= set(data["_provenance"])
