"""Regenerate the bundled calibrated network from the standard 9-bus data.

    python tools/calibrate_wscc9.py
"""

from prscert.netmodel.network import bundled_network_path, load_network, save_network
from prscert.netmodel.powerflow import calibrate_base_loads

BASE_POINT = {
    "Pg1": 1.515, "Pg2": 2.922, "Pg3": 1.523,
    "Qg1": 1.421, "Qg2": 1.119, "Qg3": 0.590,
    "Vm1": 1.040, "Vm2": 1.025, "Vm3": 1.025,
}

if __name__ == "__main__":
    std = load_network(bundled_network_path("wscc9_standard.json"))
    net = calibrate_base_loads(std, BASE_POINT)
    from dataclasses import replace
    net = replace(net, name="WSCC 3-machine 9-bus (loads calibrated to the stable base point)")
    save_network(net, bundled_network_path("wscc9.json"))
    for ld in net.loads:
        print(f"bus {ld.bus}: P = {ld.p:.6f}  Q = {ld.q:.6f}")
