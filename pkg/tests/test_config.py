import json

import pytest

from sepvol import config as cfg
from sepvol.config import ConfigError, RunConfig


def test_defaults_validate():
    c = RunConfig()
    assert c.N == 6 and c.dims == (2, 3) and c.metrics == cfg.METRIC_TAGS


def test_ini_round_trip():
    c = RunConfig(N=4, dims=(2, 2), strata=(0, 1), metrics=("hs", "bures"), points=12345,
                  base=17, eps=1e-9, label="x")
    back = RunConfig.from_ini(c.to_ini())
    assert back == c
    assert "[sequence]" in c.to_ini()


def test_json_round_trip(tmp_path):
    c = RunConfig(seed=5, kind="pseudorandom", hyperarea_mode="projection")
    p = tmp_path / "c.json"
    p.write_text(c.to_json())
    assert cfg.load(str(p)) == c
    p2 = tmp_path / "c.ini"
    p2.write_text(c.to_ini())
    assert cfg.load(str(p2)) == c


def test_digest_stable_under_reordering():
    c = RunConfig(N=4, dims=(2, 2), seed=3)
    d = c.to_dict()
    shuffled = dict(reversed(list(d.items())))
    assert RunConfig.from_dict(shuffled).digest == c.digest
    ini = c.to_ini().split("\n\n")
    assert RunConfig.from_ini("\n\n".join(reversed(ini))).digest == c.digest


def test_digest_ignores_budget_and_plumbing():
    c = RunConfig()
    assert c.with_(points=7, shards=3, workers=2, out_dir="o", label="l").digest == c.digest
    assert c.with_(seed=1).digest != c.digest
    assert c.with_(metrics=("hs",)).digest != c.digest


@pytest.mark.parametrize("kw", [
    dict(N=6, dims=(2, 2)), dict(N=5, dims=(1, 5)), dict(points=0), dict(block=0),
    dict(metrics=()), dict(metrics=("nope",)), dict(metrics=("hs", "hs")), dict(strata=(6,)),
    dict(strata=()), dict(kind="sobol"), dict(eps=-1.0), dict(floor=0.0), dict(shards=0),
    dict(angle_map="x"), dict(hyperarea_mode="projection", strata=(1,)),
])
def test_validation(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw)


def test_bad_files(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[run]\npoints = lots\n")
    with pytest.raises(ConfigError):
        cfg.load(str(p))
    p.write_text("[run]\nmystery = 1\n")
    with pytest.raises(ConfigError, match="unknown"):
        cfg.load(str(p))
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        cfg.load(str(p))
    with pytest.raises(ConfigError):
        cfg.load(str(tmp_path / "missing.ini"))


def test_scientific_point_counts():
    c = RunConfig.from_ini("[run]\npoints = 1e7\nblock = 2e5\n")
    assert c.points == 10_000_000 and c.block == 200_000


def test_presets():
    assert set(cfg.PRESETS) >= {"n4-desk", "n6-volume", "n6-hyperarea", "n6-rank4", "n4-hs-fit"}
    d = cfg.preset("n4-desk")
    assert d.N == 4 and d.points == 10 ** 7 and d.metrics == cfg.METRIC_TAGS
    assert cfg.preset("n6-rank4").strata == (0, 1, 2)
    assert json.loads(cfg.preset("n6-smoke").to_json())["points"] == 10 ** 6
    with pytest.raises(ConfigError):
        cfg.preset("n9")


def test_worker_env(monkeypatch):
    monkeypatch.delenv(cfg.WORKERS_ENV, raising=False)
    assert RunConfig().effective_workers() == 1
    monkeypatch.setenv(cfg.WORKERS_ENV, "3")
    assert RunConfig().effective_workers() == 3
    assert RunConfig(workers=2).effective_workers() == 2
    monkeypatch.setenv(cfg.WORKERS_ENV, "many")
    with pytest.raises(ConfigError):
        RunConfig().effective_workers()
