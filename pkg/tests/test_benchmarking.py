import pandas as pd
import pytest

from fogcrypt.benchmarking import (
    BENCH_COLUMNS,
    BENCH_SCHEMES,
    DEFAULT_SCHEMES,
    BenchReport,
    BenchScheme,
    bench_scheme,
    make_payloads,
    reference_us_per_byte,
    reports_to_frame,
    run_bench,
    write_csv,
)


class TestSchemes:
    @pytest.mark.parametrize("name", BENCH_SCHEMES)
    def test_decrypt_inverts_encrypt(self, name):
        scheme = BenchScheme.from_type(name, seed=3)
        payloads = make_payloads(20, seed=3)
        scheme.setup(len(payloads))
        scheme.reset()
        decrypted = scheme.decrypt_all(scheme.encrypt_all(payloads))
        if name == "aes256-ctr":
            decrypted = [d[:55] for d in decrypted]
        assert decrypted == payloads

    @pytest.mark.parametrize("name", ["proposed", "proposed-precomputed", "aes256-ctr"])
    def test_blocks_are_64_bytes(self, name):
        scheme = BenchScheme.from_type(name)
        scheme.setup(4)
        scheme.reset()
        assert [len(b) for b in scheme.encrypt_all(make_payloads(4))] == [64] * 4

    def test_precomputed_matches_online(self):
        payloads = make_payloads(10, seed=1)
        online = BenchScheme.from_type("proposed", seed=1)
        precomputed = BenchScheme.from_type("proposed-precomputed", seed=1)
        for scheme in (online, precomputed):
            scheme.setup(10)
            scheme.reset()
        assert online.encrypt_all(payloads) == precomputed.encrypt_all(payloads)

    def test_unknown(self):
        with pytest.raises(ValueError):
            BenchScheme.from_type("rot13")

    def test_payloads(self):
        payloads = make_payloads(3, seed=9)
        assert [len(p) for p in payloads] == [55] * 3
        assert payloads == make_payloads(3, seed=9)


class TestBenchScheme:
    @pytest.mark.parametrize("name", BENCH_SCHEMES)
    def test_small_run(self, name):
        report = bench_scheme(name, blocks=200, runs=2, warmup=1)
        assert isinstance(report, BenchReport)
        assert report.scheme == name
        assert report.encrypt_us_per_byte > 0
        assert report.decrypt_us_per_byte > 0
        assert (report.blocks, report.runs) == (200, 2)
        if name == "proposed":
            assert report.key_setup_us is None
        else:
            assert report.key_setup_us > 0

    @pytest.mark.parametrize("kwargs", [dict(blocks=0), dict(runs=0), dict(warmup=-1)])
    def test_bad_arguments(self, kwargs):
        with pytest.raises(ValueError):
            bench_scheme("proposed", **kwargs)

    def test_run_bench_rejects_unknown_schemes(self):
        with pytest.raises(ValueError):
            run_bench(["proposed", "rot13"], blocks=1, runs=1)

    def test_default_schemes(self):
        reports = run_bench(blocks=50, runs=1, warmup=0)
        assert [r.scheme for r in reports] == list(DEFAULT_SCHEMES)


class TestReportTable:
    def test_frame_columns(self):
        reports = run_bench(["proposed", "aes256-ctr"], blocks=20, runs=1, warmup=0)
        df = reports_to_frame(reports)
        assert list(df.columns) == BENCH_COLUMNS
        assert pd.isna(df.loc[0, "key_setup_us"])

    def test_csv_writes_na(self, tmp_path):
        reports = [
            BenchReport(
                scheme="proposed", encrypt_us_per_byte=0.1, decrypt_us_per_byte=0.1, blocks=1, runs=1, host="h"
            ),
            BenchReport(
                scheme="aes256-ctr",
                encrypt_us_per_byte=0.01,
                decrypt_us_per_byte=0.01,
                key_setup_us=2.5,
                blocks=1,
                runs=1,
                host="h",
            ),
        ]
        path = tmp_path / "bench.csv"
        write_csv(reports, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(BENCH_COLUMNS)
        assert lines[1] == "proposed,0.1,0.1,N/A,1,1,h"
        assert lines[2] == "aes256-ctr,0.01,0.01,2.5,1,1,h"


@pytest.mark.slow
class TestTimingProperties:
    def test_encrypt_and_decrypt_cost_the_same(self):
        report = bench_scheme("proposed", blocks=100_000, runs=5)
        assert report.decrypt_us_per_byte / report.encrypt_us_per_byte < 1.25
        assert report.encrypt_us_per_byte / report.decrypt_us_per_byte < 1.25

    def test_overhead_over_bare_hash(self):
        report = bench_scheme("proposed", blocks=100_000, runs=5)
        assert report.encrypt_us_per_byte < 2 * reference_us_per_byte(blocks=100_000, runs=5)

    def test_precomputation_pays_off(self):
        online = bench_scheme("proposed", blocks=100_000, runs=5)
        precomputed = bench_scheme("proposed-precomputed", blocks=100_000, runs=5)
        assert precomputed.encrypt_us_per_byte < online.encrypt_us_per_byte
        assert precomputed.decrypt_us_per_byte < online.decrypt_us_per_byte
