import numpy as np
import pytest

from patchqnn.algorithms.simulator.base import Gate, Slot
from patchqnn.system.ansatz import (CircuitTemplate, build_encoding_block,
                                    build_entangling_block, build_qnn_template,
                                    count_parameters, cz_ring, encoding_gates)
from patchqnn.utils.constants import Constants


def _slots(gates, kind):
    return [g.slot.index for g in gates if g.slot is not None and g.slot.kind == kind]


def _n_cz(gates):
    return sum(1 for g in gates if g.kind == "CZ")


@pytest.mark.parametrize("n_qc,d", sorted(Constants.REFERENCE_PARAMETER_COUNTS))
def test_parameter_counts_match_reference_table(n_qc, d):
    expected = Constants.REFERENCE_PARAMETER_COUNTS[(n_qc, d)]
    assert n_qc * build_qnn_template(8, d).n_trainable == expected
    assert count_parameters(8, d, n_qc) == expected


def test_template_slot_counts():
    assert build_qnn_template(8, 50).n_trainable == 2528
    assert build_qnn_template(8, 200).n_trainable == 9728
    for d in (1, 2, 50):
        assert build_qnn_template(8, d).n_encoding == 64


def test_cz_ring_degenerate_widths():
    assert cz_ring(1) == []
    assert cz_ring(2) == [Gate.cz(0, 1)]
    assert [g.targets for g in cz_ring(4)] == [(0, 1), (1, 2), (2, 3), (3, 0)]


def test_entangling_block():
    gates = build_entangling_block(8, 0, include_cz=True)
    assert len(_slots(gates, "trainable")) == 16
    assert _n_cz(gates) == 8
    gates = build_entangling_block(8, 0, include_cz=False)
    assert len(_slots(gates, "trainable")) == 16
    assert _n_cz(gates) == 0
    gates = build_entangling_block(3, 10)
    assert _slots(gates, "trainable") == list(range(10, 16))
    assert _n_cz(gates) == 3
    # RX layer first, then RY
    assert [g.kind for g in gates[:3]] == ["RX"] * 3
    assert [g.kind for g in gates[3:6]] == ["RY"] * 3


@pytest.mark.parametrize("n,n_cz", [(8, 8), (1, 0), (2, 1)])
def test_encoding_block(n, n_cz):
    gates = build_encoding_block(n, 0, 0)
    assert len(_slots(gates, "trainable")) == 8 * n
    assert len(_slots(gates, "encoding")) == 4 * n
    assert _n_cz(gates) == n_cz
    assert gates[-1].kind == "CZ" or n_cz == 0


def test_encoding_block_layer_pattern():
    gates = build_encoding_block(2, 0, 0)
    rotations = [g for g in gates if g.kind != "CZ"]
    layers = [(rotations[k].kind, rotations[k].slot.kind) for k in range(0, len(rotations), 2)]
    sequence = [("RY", "trainable"), ("RX", "encoding"), ("RY", "trainable"),
                ("RX", "trainable"), ("RY", "encoding"), ("RX", "trainable")]
    assert layers == sequence * 2


def test_encoding_block_cz_placement_switch():
    single = build_encoding_block(4, 0, 0)
    split = build_encoding_block(4, 0, 0, cz_per_sequence=True)
    assert _n_cz(single) == 4
    assert _n_cz(split) == 8
    t = build_qnn_template(4, 1, encoding_cz_per_sequence=True)
    assert t.n_cz == build_qnn_template(4, 1).n_cz + 2 * 4


def test_last_entangling_block_has_no_cz():
    t = build_qnn_template(3, 2)
    assert t.gates[-1].kind == "RY"
    # 3d entangling blocks (last without CZ) plus 2 encoding blocks
    assert t.n_cz == (3 * 2 - 1) * 3 + 2 * 3


def test_slot_numbering_follows_circuit_order():
    t = build_qnn_template(2, 1)
    assert _slots(t.gates, "trainable") == list(range(t.n_trainable))
    assert _slots(t.gates, "encoding") == list(range(t.n_encoding))
    enc = encoding_gates(t)
    assert [g.slot.index for g in enc] == list(range(t.n_encoding))
    assert [g.targets[0] for g in enc[:2]] == [0, 1]


def test_template_is_deterministic():
    a = build_qnn_template(4, 3)
    b = build_qnn_template(4, 3)
    assert a == b
    assert a.gates == b.gates
    np.testing.assert_array_equal(a.program.kinds, b.program.kinds)
    assert len(a) == len(a.gates)


def test_template_validation():
    with pytest.raises(ValueError):
        build_qnn_template(0, 1)
    with pytest.raises(ValueError):
        build_qnn_template(2, 0)
    with pytest.raises(ValueError):
        count_parameters(8, 0)
    with pytest.raises(ValueError):
        CircuitTemplate(2, (Gate.ry(0, Slot("trainable", 1)),), 1, 0)
    with pytest.raises(ValueError):
        CircuitTemplate(1, (Gate.cz(0, 1),), 0, 0)
