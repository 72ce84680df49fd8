import random
from datetime import timedelta

from gen import TS, random_alert
from sigforge.alert_io import Alert, parse_alert_file
from sigforge.alert_merge import merge, output_paths, write_merge


def alert(t, msg="o", sport=1000):
    return Alert(ts=TS + timedelta(seconds=t), msg=msg, priority=1, protocol="tcp",
                 src_ip="10.0.0.1", src_port=sport, dst_ip="10.0.0.2", dst_port=80, sid=1, rev=1)


def test_only_generalised():
    g1 = alert(1, "g")
    r = merge([], [g1])
    assert (r.merged, r.fuzz, r.rejected_fuzz) == ([g1], [g1], [])


def test_same_packet_prefers_original():
    o1, g1 = alert(1, "o"), alert(1, "g")
    r = merge([o1], [g1])
    assert (r.merged, r.fuzz, r.rejected_fuzz) == ([o1], [], [g1])


def test_chronological():
    o1, g1, g2 = alert(2, "o"), alert(1, "g1", sport=5), alert(2, "g2")
    r = merge([o1], [g1, g2])
    assert r.merged == [g1, o1]
    assert r.fuzz == [g1] and r.rejected_fuzz == [g2]


def test_tie_order():
    o = alert(1, "o", sport=1)
    g = alert(1, "g", sport=2)
    assert merge([o], [g]).merged == [o, g]
    assert merge([], [g, alert(1, "g2", sport=3)]).merged[0] == g


def test_duplicate_generalised_keys_survive():
    g1, g2 = alert(1, "g1"), alert(1, "g2")
    r = merge([], [g1, g2])
    assert r.fuzz == [g1, g2] and r.merged == [g1, g2]


def test_deterministic_and_counts():
    rng = random.Random(4)
    orig = [random_alert(rng, tag_rate=0) for _ in range(200)]
    gen = [random_alert(rng, tag_rate=1) for _ in range(200)]
    a, b = merge(orig, gen), merge(list(orig), list(gen))
    assert a == b
    assert len(a.merged) == len(orig) + len(a.fuzz)


def test_write_merge(tmp_path):
    target = tmp_path / "gen.alerts"
    r = merge([alert(2)], [alert(1, "g"), alert(2, "g")])
    paths = write_merge(r, target)
    assert paths == output_paths(target)
    assert sorted(p.name for p in paths.values()) == [
        "gen.alerts.fuzz", "gen.alerts.merged", "gen.alerts.rejected_fuzz"]
    for name, path in paths.items():
        assert parse_alert_file(path.read_text())[0] == getattr(r, name)
