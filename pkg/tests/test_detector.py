import pytest

from gamesight.codebook import (
    decode_gameplay_name,
    default_codebooks,
    match_setup_signature,
    wildcard_match,
)
from gamesight.detector import (
    STATE_GAMEPLAY,
    STATE_PLATFORM,
    SessionDetector,
)
from gamesight.flows import FlowKey

CLIENT = "192.0.2.10"


def _detector():
    books, _ = default_codebooks()
    return SessionDetector(books)


def _key(server_ip="203.0.113.20", sport=443, cport=40000, proto=6):
    return FlowKey(CLIENT, cport, server_ip, sport, proto)


GFN_CORE = [
    "login.nvidia.com",
    "events.nvidia.com",
    "userstore.nvidia.com",
    "gfnpc.api.entitlement-prod.nvidiagrid.net",
]


def _observe(det, names, t0=0.0, step=1.0):
    for i, n in enumerate(names):
        det.observe_service_name(_key(cport=40000 + i), n, t0 + i * step)
        det.evaluate_codebook(CLIENT, t0 + i * step)


# -- wildcard / decoding ------------------------------------------------


def test_wildcard_prefix_on_labels():
    assert wildcard_match("login.nvidia", "login.nvidia.com")
    assert wildcard_match("login.nvidia.com", "login.nvidia.com")
    assert not wildcard_match("login.nvidia.com.extra", "login.nvidia.com")
    assert not wildcard_match("xgpu.xboxlive", "xgpuweb.xboxlive.com")  # label equality, not prefix
    assert wildcard_match("*.nvidia", "cms.nvidia.com")
    assert not wildcard_match("*.nvidia", "nvidia.com")


def test_decode_gameplay_name():
    # dashed server IP embedded in the management SNI
    pat = "{ip}.pnt.nvidiagrid.net"
    assert decode_gameplay_name(pat, "203-0-113-7.pnt.nvidiagrid.net") == "203.0.113.7"
    assert decode_gameplay_name(pat, "203-0-113.pnt.nvidiagrid.net") is None
    assert decode_gameplay_name(pat, "evil.example.com") is None
    assert decode_gameplay_name(pat, "1-2-3-999.pnt.nvidiagrid.net") is None


# -- codebook correlation ----------------------------------------------


def test_all_core_required():
    det = _detector()
    _observe(det, GFN_CORE[:3])
    assert det.sessions == []
    _observe(det, GFN_CORE[3:], t0=3.0)
    assert len(det.sessions) == 1
    assert det.sessions[0].platform_id == "gfn"
    assert det.sessions[0].state == STATE_PLATFORM


def test_setup_refined_after_core_completes():
    det = _detector()
    _observe(det, GFN_CORE)
    assert det.sessions[0].setup == "unknown"
    _observe(det, ["cms.nvidia.com", "als.nvidia.com", "gx-target-experiments-frontend-api.nvidia.com"], t0=5.0)
    assert det.sessions[0].setup == "desktop_app"
    assert not det.sessions[0].setup_ambiguous


def test_partial_setup_below_threshold_stays_unknown():
    det = _detector()
    _observe(det, GFN_CORE + ["cms.nvidia.com"])  # 1/3 of the desktop table
    assert det.sessions[0].setup == "unknown"


def test_xbox_pc_browser_setup():
    det = _detector()
    _observe(det, ["login.xboxlive.com", "regional-node.xboxlive.com", "xgpuweb.xboxlive.com"])
    assert len(det.sessions) == 1
    assert det.sessions[0].platform_id == "xbox"
    assert det.sessions[0].setup == "pc_browser"


def test_idempotent_until_session_ends():
    det = _detector()
    _observe(det, GFN_CORE)
    _observe(det, GFN_CORE, t0=10.0)
    assert len(det.sessions) == 1
    det.end_session(CLIENT, 20.0)
    _observe(det, GFN_CORE, t0=21.0)
    assert len(det.sessions) == 2


def test_horizon_pruning_blocks_stale_names():
    det = _detector()
    _observe(det, GFN_CORE[:3], t0=0.0)
    # the fourth core domain arrives 700 s later: first three fell out of the
    # 10-minute observation horizon
    det.observe_service_name(_key(cport=41000), GFN_CORE[3], 700.0)
    det.evaluate_codebook(CLIENT, 700.0)
    assert det.sessions == []


# -- gameplay server registration --------------------------------------


def test_register_gameplay_server_console_port():
    det = _detector()
    _observe(det, GFN_CORE)
    key = _key(server_ip="203.0.113.7", sport=322, cport=51000)
    reg = det.register_gameplay_server("203-0-113-7.pnt.nvidiagrid.net", key, 5.0)
    assert reg is not None
    assert reg.setup_class == "console_app"
    assert not reg.ip_mismatch_warning
    assert det.sessions[0].state == STATE_GAMEPLAY
    assert det.sessions[0].gameplay_server_ip == "203.0.113.7"


def test_register_flags_ip_mismatch():
    det = _detector()
    key = _key(server_ip="203.0.113.99", sport=322)
    reg = det.register_gameplay_server("203-0-113-7.pnt.nvidiagrid.net", key, 5.0)
    assert reg.ip_mismatch_warning


def test_register_xbox_carries_port_range():
    det = _detector()
    key = _key(server_ip="203.0.113.7", sport=49100)
    reg = det.register_gameplay_server("203-0-113-7.cloudgame.xboxlive.com", key, 5.0)
    assert reg.platform_id == "xbox"
    assert reg.server_port_range == (1040, 1190)


def test_non_gameplay_name_not_registered():
    det = _detector()
    key = _key(sport=322)
    assert det.register_gameplay_server("login.nvidia.com", key, 5.0) is None
    assert det.registrations == {}


def test_wrong_port_not_registered():
    det = _detector()
    key = _key(server_ip="203.0.113.7", sport=443)
    assert det.register_gameplay_server("203-0-113-7.pnt.nvidiagrid.net", key, 5.0) is None


# -- handshake-size signatures -----------------------------------------


@pytest.mark.parametrize(
    "up,down,port,expect",
    [
        ([517], [1460, 1460, 502], 322, ("windows", "console_app")),
        ([517, 99], [1460, 1460, 502, 31], 49100, ("windows", "browser")),
        ([517], [1412, 1412], 322, ("macos", "console_app")),
        ([517], [3455], 322, ("android", "console_app")),
        ([517], [3450], 49100, ("ios", "browser")),
        ([517], [3450], 322, None),  # ios signature only on the browser port
        ([516], [1460, 1460, 502], 322, None),
        ([517], [1460, 1460], 322, None),  # windows needs all three down sizes
        ([], [1460, 1460, 502], 322, None),
    ],
)
def test_signature_matching(up, down, port, expect):
    books, _ = default_codebooks()
    gfn = books[0]
    assert match_setup_signature(gfn.signatures, up, down, port, gfn.mgmt_ports) == expect


def test_register_by_signature():
    det = _detector()
    key = _key(server_ip="203.0.113.7", sport=322)
    reg = det.register_by_signature(key, 3.0, "gfn", "console_app")
    assert reg.via_signature
    assert det.registrations[key] is reg
