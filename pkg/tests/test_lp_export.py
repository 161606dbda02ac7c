import numpy as np

from relabelsvm import ClusterSvmSpec, Dataset
from relabelsvm.lp_export import big_m_constant, export_cluster_model


def small_dataset():
    return Dataset(np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]),
                   np.array([1, -1, 1]), id="lp")


def test_big_m_formula():
    d = small_dataset()
    W = 10.0
    expect = 1.0 + 2.0 * 4.0 * W + W  # max l1 row norm is |3| + |-1| = 4
    assert big_m_constant(d, W) == expect


def test_l1_export_structure(tmp_path):
    d = small_dataset()
    spec = ClusterSvmSpec(c1=1.0, c2=0.5, c3=0.25, norm="l1")
    path = export_cluster_model(d, spec, tmp_path / "m.lp", coef_box=10.0)
    text = (tmp_path / "m.lp").read_text()
    assert f"big-M={big_m_constant(d, 10.0):.12g}" in text
    # one sign constraint, two error constraints per point
    for i in range(d.n):
        for tag in (f"sign{i}:", f"errp{i}:", f"errm{i}:", f"dp{i}:", f"dm{i}:"):
            assert tag in text
    # l1 margin and distance linearizations
    assert "u0" in text and "ap0_0" in text and "am2_1" in text
    binaries_line = text.split("Binaries\n")[1].splitlines()[0]
    assert binaries_line.split() == [f"xi{i}" for i in range(3)] + [f"th{i}" for i in range(3)]


def test_l2_export_has_cone_sections(tmp_path):
    d = small_dataset()
    spec = ClusterSvmSpec(c1=1.0, c2=0.5, c3=0.25, norm="l2")
    export_cluster_model(d, spec, tmp_path / "m.lp", coef_box=5.0)
    text = (tmp_path / "m.lp").read_text()
    assert "qmargin:" in text and "qdp0:" in text and "qdm2:" in text
    assert "0 <= t" in text
    assert "slkp1:" in text and "slkm1:" in text
