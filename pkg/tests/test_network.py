import json

import numpy as np
import pytest

from prscert.netmodel import NetworkError, bundled_network_path, load_network, save_network, wscc9
from prscert.netmodel.network import network_from_dict, network_to_dict


def _doc():
    return json.loads(bundled_network_path("wscc9.json").read_text())


def test_bundled_layout(net):
    assert net.n_bus == 9
    assert len(net.generators) == 3
    assert len(net.loads) == 3
    assert [g.bus for g in net.generators] == [1, 2, 3]
    assert sorted(l.bus for l in net.loads) == [5, 6, 8]
    assert net.buses[net.slack_index].id == 1


def test_standard_data_loads():
    std = wscc9(calibrated=False)
    p, q = std.load_vectors()
    assert p.sum() == pytest.approx(3.15)
    assert q.sum() == pytest.approx(1.15)


def test_two_slack_buses():
    doc = _doc()
    doc["buses"][1]["type"] = "slack"
    with pytest.raises(NetworkError, match="multiple slack buses"):
        network_from_dict(doc)


def test_zero_inertia_names_machine():
    doc = _doc()
    doc["generators"][1]["machine"]["H"] = 0.0
    with pytest.raises(NetworkError, match="machine 2"):
        network_from_dict(doc)


def test_round_trip(tmp_path, net):
    path = tmp_path / "net.json"
    save_network(net, path)
    again = load_network(path)
    assert network_to_dict(again) == network_to_dict(net)
    np.testing.assert_array_equal(again.ybus(), net.ybus())


def test_parse_error_has_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"buses": [\n  {"id": 1,,}\n]}')
    with pytest.raises(NetworkError, match="line 2"):
        load_network(path)


def test_missing_file(tmp_path):
    with pytest.raises((NetworkError, OSError)):
        load_network(tmp_path / "nope.json")


def test_ybus_symmetric(net):
    Y = net.ybus()
    np.testing.assert_allclose(Y, Y.T)
    assert np.all(np.isfinite(Y))
