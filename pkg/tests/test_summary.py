import json
import random
from dataclasses import replace

from gen import random_alert
from sigforge.summary import SummaryEntry, alert_method, render_text, summarize
from test_alert_merge import alert

REPORTED = [(250, 3), (255, 3), (323, 1), (530, 1), (1201, 10), (1377, 9), (1378, 1)]


def table_alerts():
    out = []
    t = 0
    for sid, n in REPORTED:
        for _ in range(n):
            out.append(replace(alert(t, f"rule {sid} FuzzRuleId cor[0,1]"), sid=sid))
            t += 1
    return out


def test_empty():
    r = summarize([])
    assert (r.per_alert, r.per_method, r.total_alerts, r.suppressed) == ([], [], 0, [])
    assert "Total alerts: 0" in render_text(r)


def test_reported_frequencies():
    r = summarize(table_alerts(), max_frequency=25)
    assert r.suppressed == []
    assert [(e.sid, e.count) for e in sorted(r.per_alert, key=lambda e: e.sid)] == REPORTED
    assert [e.count for e in r.per_alert] == [10, 9, 3, 3, 1, 1, 1]
    assert [e.sid for e in r.per_alert] == [1201, 1377, 250, 255, 323, 530, 1378]
    assert r.per_method == [("cor", 28)]
    assert {e.sid for e in r.low_frequency} == {250, 255, 323, 530, 1377, 1378}


def test_cutoff():
    noisy = [alert(i % 50, "noise") for i in range(38_000)]
    r = summarize(noisy + table_alerts(), max_frequency=25)
    assert r.suppressed == [SummaryEntry(1, "noise", 38_000)]
    assert 1 not in {e.sid for e in r.per_alert}
    assert r.total_alerts == 38_000 + 28
    text = render_text(r)
    assert "Suppressed (count > 25) (1)" in text


def test_methods():
    assert alert_method("plain") == "original"
    assert alert_method("x FuzzRuleId inv:dport") == "inv:dport"
    assert alert_method("x FuzzRuleId inv:content[2]") == "inv:content"
    assert alert_method("x FuzzRuleId urr[1,0]") == "urr"
    assert alert_method("x FuzzRuleId cor('|3b|')") == "cor"


def test_conservation_and_monotonicity():
    rng = random.Random(8)
    for _ in range(50):
        alerts = [random_alert(rng) for _ in range(rng.randint(0, 300))]
        previous = -1
        for cutoff in (None, 0, 1, 3, 5, 10, 1000):
            r = summarize(alerts, cutoff)
            assert sum(e.count for e in r.per_alert) + sum(e.count for e in r.suppressed) == len(alerts)
            assert sum(n for _, n in r.per_method) == len(alerts)
        for cutoff in (0, 1, 3, 5, 10, 1000):
            size = len(summarize(alerts, cutoff).per_alert)
            assert size >= previous
            previous = size


def test_json():
    body = json.loads(summarize(table_alerts(), 5).to_json())
    assert body["total_alerts"] == 28
    assert [e["sid"] for e in body["suppressed"]] == [1201, 1377]
    assert len(body["low_frequency"]) == 5  # 1201 and 1377 are suppressed at cutoff 5
