import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from c2traffic.dns_features import (DnsWindowGroup, ask_res_rate, build_dns_vector,
                                    c2load_fluct, dns_columns, dns_table, port_abnormal,
                                    window_dns)
from c2traffic.features import onehot_blocks, read_table, write_table
from c2traffic.ingest import QUERY, RESPONSE, RTYPES, UDP, DnsMessage, PacketRecord
from c2traffic.intel import IntelMaps, load_maps

CLIENT, SERVER = "10.0.0.5", "8.8.8.8"


def q(ts, qname="abc.example.com", rtype="A", sport=40000, size=40, client=CLIENT, dport=53):
    return PacketRecord(ts, client, SERVER, sport, dport, UDP, size,
                        dns=DnsMessage(QUERY, qname, rtype, None, size - 12))


def r(ts, body, qname="abc.example.com", rtype="A", ttl=60, dport=40000, client=CLIENT,
      addrs=("1.2.3.4",)):
    if rtype != "A":
        addrs = ()
    return PacketRecord(ts, SERVER, client, 53, dport, UDP, body + 12,
                        dns=DnsMessage(RESPONSE, qname, rtype, ttl, body, addrs))


def test_window_boundary_splits():
    groups = window_dns([q(10), q(70)], 60)
    assert [g.window_index for g in groups] == [0, 1]


def test_query_and_response_share_group():
    (g,) = window_dns([q(5), r(5.1, 60)], 60)
    assert len(g.queries) == 1 and len(g.responses) == 1
    assert g.src_ip == CLIENT


def test_empty_stream():
    assert window_dns([], 60) == []


def test_non_dns_records_ignored():
    rec = PacketRecord(1.0, "1.1.1.1", "2.2.2.2", 1, 2, UDP, 10)
    assert window_dns([rec]) == []


def _group(qname, bodies):
    g = DnsWindowGroup(0, CLIENT, qname, 60)
    g.responses = [r(0, b, qname=qname) for b in bodies]
    return g


def test_c2load_fluct_tunnel_mode():
    assert c2load_fluct(_group("a" * 20, [60, 60, 60])) == 3.0


def test_c2load_fluct_unit():
    assert c2load_fluct(_group("b" * 17, [17])) == 1.0


def test_c2load_fluct_mean():
    assert c2load_fluct(_group("c" * 15, [100, 200])) == 10.0


@given(st.lists(st.integers(0, 500), min_size=1, max_size=10), st.integers(1, 5))
def test_c2load_fluct_homogeneous(bodies, c):
    a = c2load_fluct(_group("d" * 9, bodies))
    b = c2load_fluct(_group("d" * 9, [c * x for x in bodies]))
    assert b == pytest.approx(c * a, rel=1e-12)


@pytest.mark.parametrize("nq,nr,expected", [(5, 5, 1.0), (10, 0, 10.0), (3, 6, 0.5)])
def test_ask_res_rate(nq, nr, expected):
    g = DnsWindowGroup(0, CLIENT, "x.com", 60)
    g.queries = [q(i) for i in range(nq)]
    g.responses = [r(i, 20) for i in range(nr)]
    assert ask_res_rate(g) == expected


def test_port_abnormal_examples():
    assert port_abnormal([40000], [53]) == 0
    assert port_abnormal([40000], [5353], (1, 1, 1)) == 1
    assert port_abnormal([4000, 4001, 4002], [53], (2, 0, 0)) == 2
    assert port_abnormal([4000, 4002, 4003], [53], (1, 0, 0)) == 0
    assert port_abnormal([1000, 30000, 2000], [53], (0, 1, 0)) == 1
    assert port_abnormal([1000, 30000, 29000], [53], (0, 1, 0)) == 0
    with pytest.raises(ValueError):
        port_abnormal([1], [53], (1, -1, 0))


def _vec(records, maps=None):
    maps = maps or IntelMaps()
    (g,) = window_dns(records, 60)
    cols = dns_columns(maps.regions())
    return dict(zip(cols, build_dns_vector(g, maps).values))


def test_txt_only_selects_txt_slot():
    v = _vec([q(1, rtype="TXT"), r(1.1, 80, rtype="TXT"), r(2, 80, rtype="TXT")])
    assert v["Response_type=TXT"] == 1.0
    assert sum(v[f"Response_type={t}"] for t in RTYPES) == 1.0


def test_queries_only_group():
    v = _vec([q(1), q(2), q(3)])
    assert v["C2Load_fluct"] == 0 and v["TTL"] == 0
    assert v["Ask_Res_rate"] == 3


def test_modal_rtype():
    v = _vec([r(1, 40, rtype="A"), r(2, 40, rtype="A"), r(3, 40, rtype="CNAME")])
    assert v["Response_type=A"] == 1.0


def test_modal_tie_uses_enum_order():
    v = _vec([r(1, 40, rtype="TXT"), r(2, 40, rtype="MX")])
    assert v["Response_type=MX"] == 1.0


def test_vector_fields(tmp_path):
    geo = tmp_path / "geo.csv"
    geo.write_text("1.2.3.4,CN\n")
    alexa = tmp_path / "alexa.csv"
    alexa.write_text("example.com,100\n")
    maps = load_maps(alexa_path=alexa, geo_path=geo)
    v = _vec([q(1, size=45), q(2, size=50, sport=40001), r(1.1, 90, ttl=30), r(2.1, 30, ttl=90)],
             maps)
    assert v["Alexa_score"] == pytest.approx(1 / 3)
    assert v["Local_abnormal=CN"] == 1.0 and v["Local_abnormal=UNK"] == 0.0
    assert v["ClientLen_max"] == 50 and v["C2Len_max"] == 102
    assert v["TTL"] == 60.0
    assert v["C2Load_fluct"] == pytest.approx(60 / 15)


# -- brute-force grouping oracle ------------------------------------------

def _naive_groups(records, W):
    """O(n^2): for each record, collect every record sharing its key."""
    out = []
    seen = set()
    for a in records:
        if a.dns is None or id(a) in seen:
            continue
        ca = a.dst_ip if a.dns.qr == RESPONSE else a.src_ip
        members = []
        for b in records:
            if b.dns is None:
                continue
            cb = b.dst_ip if b.dns.qr == RESPONSE else b.src_ip
            if (math.floor(b.ts / W) == math.floor(a.ts / W) and ca == cb
                    and a.dns.qname == b.dns.qname):
                members.append(b)
                seen.add(id(b))
        out.append(members)
    return out


def _naive_values(members):
    qs = [m for m in members if m.dns.qr == QUERY]
    rs = [m for m in members if m.dns.qr == RESPONSE]
    qlen = len(members[0].dns.qname)
    load = (sum(m.dns.answer_payload_len for m in rs) / len(rs) / qlen) if rs else 0.0
    return {
        "C2Load_fluct": load,
        "Ask_Res_rate": len(qs) / max(1, len(rs)),
        "ClientLen_max": max([m.payload_len for m in qs] or [0]),
        "C2Len_max": max([m.payload_len for m in rs] or [0]),
        "TTL": (sum(m.dns.ttl for m in rs) / len(rs)) if rs else 0.0,
    }


def _random_records(seed, n):
    rnd = random.Random(seed)
    names = ["a.com", "bb.example.org", "tun.c2.net"]
    clients = ["10.0.0.1", "10.0.0.2"]
    out = []
    for _ in range(n):
        ts = rnd.uniform(0, 200)
        name, client = rnd.choice(names), rnd.choice(clients)
        if rnd.random() < 0.5:
            out.append(q(ts, qname=name, client=client, size=rnd.randint(12, 200),
                         sport=rnd.randint(1024, 65535)))
        else:
            out.append(r(ts, rnd.randint(20, 400), qname=name, client=client,
                         ttl=rnd.randint(0, 1000), rtype=rnd.choice(["A", "TXT", "MX"])))
    return out


@pytest.mark.parametrize("seed", range(25))
def test_grouping_matches_naive_oracle(seed):
    recs = _random_records(seed, random.Random(seed).randint(0, 50))
    groups = window_dns(recs, 60)
    naive = _naive_groups(recs, 60)
    assert sorted(len(g.queries) + len(g.responses) for g in groups) == \
        sorted(len(m) for m in naive)
    assert sum(len(g.queries) + len(g.responses) for g in groups) == len(recs)
    cols = dns_columns(["UNK"])
    by_key = {}
    for m in naive:
        a = m[0]
        ca = a.dst_ip if a.dns.qr == RESPONSE else a.src_ip
        by_key[(math.floor(a.ts / 60), ca, a.dns.qname)] = m
    for g in groups:
        vec = dict(zip(cols, build_dns_vector(g, IntelMaps()).values))
        for name, expected in _naive_values(by_key[g.key]).items():
            assert vec[name] == pytest.approx(expected, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 40))
def test_onehot_blocks_sum_to_one(seed, n):
    table = dns_table(_random_records(seed, n), IntelMaps())
    assert table.X.shape == (len(table), len(dns_columns(["UNK"])))
    for block in onehot_blocks(table.columns):
        assert np.all(table.X[:, block].sum(axis=1) == 1.0)
    assert np.all(np.isfinite(table.X))


def test_table_csv_round_trip(tmp_path):
    table = dns_table(_random_records(1, 30), IntelMaps())
    table.labels = ["Normal"] * len(table)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_table(table, p1)
    back = read_table(p1)
    assert back.columns == table.columns and back.kind == "dns"
    assert np.allclose(back.X, table.X, atol=5e-7)
    write_table(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
