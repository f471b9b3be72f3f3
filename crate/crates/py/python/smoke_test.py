"""Smoke test for the idxtune_py extension against the TPC-H fixtures.

Build first with `maturin develop` from crates/py, then run this file.
"""

from pathlib import Path

import idxtune_py as ix

FIXTURES = Path(__file__).resolve().parents[2] / "core" / "tests" / "fixtures"
TPCH = FIXTURES / "tpch"
QUERIES = ["q03", "q04", "q06", "q12", "q15"]


def main():
    catalog = ix.Catalog.from_json((TPCH / "catalog.json").read_text())
    assert "lineitem" in catalog.tables

    plans = {
        q: ix.PlanTree.from_json((TPCH / "plans" / f"{q}.json").read_text(), catalog)
        for q in QUERIES
    }
    sql = {q: (TPCH / "plans" / f"{q}.sql").read_text() for q in QUERIES}
    print(plans["q04"].render_table())

    recs = ix.recommend(plans["q04"], alpha=0.0)
    keys = {r.table: r.key_columns for r in recs}
    assert keys["orders"] == ["o_orderdate", "o_orderkey", "o_orderpriority"], keys
    assert all(not catalog.validate_index(r) for r in recs)
    for r in recs:
        print(r.to_ddl())

    view = ix.IndexDefinition("revenue0", ["supplier_no"])
    assert catalog.validate_index(view), "indexes on views must be rejected"

    single = ix.single_query_prompt(sql["q04"], catalog, plans["q04"])
    golden = (TPCH / "golden" / "single_q04.txt").read_text()
    assert single == golden, "single-query prompt differs from golden"
    multi = ix.multi_query_prompt([(sql[q], plans[q]) for q in QUERIES], catalog, 5)
    assert "5 queries" in multi and "at most 5 indexes" in multi

    advised, dropped = ix.parse_response((TPCH / "advisor" / "default.txt").read_text(), catalog)
    assert len(advised) == 4 and len(dropped) == 1, (advised, dropped)

    oracle = ix.SyntheticWorkload.from_json((TPCH / "sim.json").read_text())
    pool = [r for q in QUERIES for r in ix.recommend(plans[q])] + advised
    config = ix.greedy_select(pool, oracle.query_ids, 5, oracle)
    assert len(config.indexes) <= 5
    empty = sum(oracle.estimated_cost([], q) for q in oracle.query_ids)
    assert config.estimated_workload_cost <= empty

    report = ix.validate_configurations(
        [("empty", ix.Configuration(5, [])), ("tuned", config)], oracle
    )
    totals = {cid: total for cid, _, total in report.totals()}
    assert report.winner == min(totals, key=totals.get)
    print(report.breakdown_text())
    print(f"ok: winner {report.winner}, {report.distinct_indexes} indexes built")


if __name__ == "__main__":
    main()
