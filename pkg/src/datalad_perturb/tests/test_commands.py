import json

import pytest

pytest.importorskip("datalad")

from datalad_perturb import common  # noqa: E402
from datalad_perturb.common import (  # noqa: E402
    build_config,
    run_guarded,
)
from datalad_perturb.defend import defend_cmd  # noqa: E402
from datalad_perturb.exceptions import UsageError  # noqa: E402
from datalad_perturb.experiment import experiment_cmd  # noqa: E402
from datalad_perturb.report import (  # noqa: E402
    load,
    read,
)
from datalad_perturb.score import score_cmd  # noqa: E402
from datalad_perturb.synth import synth_cmd  # noqa: E402

UNSW = dict(catalog="builtin:unsw-nb15", fixture="builtin:unsw-nb15")


def _run(action, gen):
    return list(run_guarded(action, gen))


def _data(synth_dir):
    return dict(
        flows=str(synth_dir / "flows.csv"), catalog=str(synth_dir / "catalog.json")
    )


class _Settings(dict):
    def get(self, key, default=None):
        return super().get(key, default)


def test_config_resolution_order(monkeypatch):
    monkeypatch.setattr(
        common, "cfg", _Settings({"datalad.perturb.tau": "0.9", "datalad.perturb.model": "mlp"})
    )
    config = build_config()
    assert config.thresholds.tau == 0.9
    assert config.model.value == "mlp"
    assert build_config(tau=0.5).thresholds.tau == 0.5
    monkeypatch.setattr(common, "cfg", _Settings({"datalad.perturb.min-r": "two"}))
    with pytest.raises(UsageError, match="datalad.perturb.min-r"):
        build_config()


def test_explicit_zero_seed_is_kept():
    assert build_config(seed_undersample=0).seeds.undersample == 0


def test_score_fixture(tmp_path):
    res = _run("perturb-score", score_cmd(str(tmp_path), **UNSW))
    files = [r for r in res if r.get("type") == "file"]
    assert {r["artifact"] for r in files} == {"score-report", "score-table"}
    summary = res[-1]
    assert summary["status"] == "ok"
    assert summary["class_counts"] == {"Low": 25, "Medium": 4, "High": 18}
    assert summary["class_table"].splitlines()[1].startswith("unsw-nb15")
    env = read(tmp_path / "score.json")
    assert env.kind == "score-report"
    assert env.payload["config"]["fixture"] == "builtin:unsw-nb15"


def test_score_dataset(tmp_path, synth_dir):
    res = _run("perturb-score", score_cmd(str(tmp_path), **_data(synth_dir)))
    assert res[-1]["class_counts"] == {"Low": 6, "Medium": 3, "High": 6}
    written = sorted(p.name for p in tmp_path.iterdir())
    assert written == [
        "correlation.dot",
        "correlation.json",
        "drop_report.json",
        "score.csv",
        "score.json",
    ]
    assert read(tmp_path / "drop_report.json").payload["rows_dropped"] == 0


def test_score_errors_become_results(tmp_path):
    res = _run("perturb-score", score_cmd(None, **UNSW))
    assert len(res) == 1
    assert res[0]["status"] == "impossible"
    assert res[0]["exit_code"] == 1
    res = _run(
        "perturb-score",
        score_cmd(str(tmp_path), catalog="builtin:unsw-nb15", fixture=str(tmp_path / "none.json")),
    )
    assert res[0]["status"] == "impossible"
    assert res[0]["exit_code"] == 2
    assert res[0]["module"] == "scoring"


def test_defend_fixture(tmp_path):
    res = _run("perturb-defend", defend_cmd(str(tmp_path), **UNSW))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["plan-A-green-only.json", "plan-B1-high.json", "plan-B2-high.json"]
    assert set(res[-1]["plans"]) == {"A/green-only", "B1/high", "B2/high"}
    plan = load(tmp_path / "plan-A-green-only.json", kind="selection-plan")
    assert len(plan.keep_indices) == 25
    masked = load(tmp_path / "plan-B1-high.json", kind="mask-plan")
    assert len(masked.masked_indices) == 18
    assert str(masked.strategy) == "const:0"


def test_defend_mean_needs_dataset(tmp_path):
    res = _run("perturb-defend", defend_cmd(str(tmp_path), neutral="mean", **UNSW))
    assert res[-1]["status"] == "impossible"
    assert "--dataset" in res[-1]["message"]


def test_defend_from_score_report(tmp_path, synth_dir):
    _run("perturb-score", score_cmd(str(tmp_path / "score"), **_data(synth_dir)))
    res = _run(
        "perturb-defend",
        defend_cmd(
            str(tmp_path / "plans"),
            str(tmp_path / "score" / "score.json"),
            defenses=["b-high-medium"],
            phase="train-inference",
            neutral="median",
            **_data(synth_dir),
        ),
    )
    assert res[-1]["status"] == "ok"
    plan = load(tmp_path / "plans" / "plan-B1-high-medium.json")
    assert len(plan.masked_indices) == 9
    assert plan.to_dict()["strategy"] == "median"


def test_experiment_needs_dataset(tmp_path):
    res = _run("perturb-experiment", experiment_cmd(str(tmp_path), **UNSW))
    assert res[-1]["status"] == "impossible"
    assert "--fixture" in res[-1]["message"]


def test_experiment_grid(tmp_path, synth_dir):
    res = _run("perturb-experiment", experiment_cmd(str(tmp_path), **_data(synth_dir)))
    summary = res[-1]
    cells = summary["cells"]
    assert list(cells) == ["baseline", "A/green-only", "B1/high", "B2/high"]
    assert all(c["status"] == "ok" for c in cells.values())
    assert cells["baseline"]["asr"] > 0
    for name in ("A/green-only", "B1/high", "B2/high"):
        assert cells[name]["asr"] == 0.0
    # Low features alone carry the class signal
    assert abs(cells["A/green-only"]["metrics"]["f1"] - cells["baseline"]["metrics"]["f1"]) <= 0.03
    assert summary["table"].splitlines()[0].split()[0] == "Cell"

    experiment = read(tmp_path / "experiment.json").payload
    assert experiment["attack"]["attack"] == "gradsign"
    assert set(experiment["attack"]["allowed"]) == {
        "fwd_pkts", "fwd_bytes", "fwd_payload", "fwd_iat_mean", "duration", "fwd_ttl",
    }
    assert experiment["class_counts"] == {"Low": 6, "Medium": 3, "High": 6}
    assert experiment["config"]["seeds"] == {"split": 0, "undersample": 1, "train": 2, "attack": 3}
    assert load(tmp_path / "model.json", kind="model").input_dim == 15


HARDENED = ("A/green-only", "B1/high-medium", "B2/high-medium")


@pytest.mark.parametrize(
    "attack, model",
    [("gradsign", "logreg"), ("gradsign", "mlp"), ("query", "logreg"), ("morph", "logreg")],
)
def test_experiment_grid_full_size(tmp_path, synth_full_dir, attack, model):
    extra = dict(morph_map=str(synth_full_dir / "morphs.json")) if attack == "morph" else {}
    res = _run(
        "perturb-experiment",
        experiment_cmd(
            str(tmp_path),
            attack=attack,
            model=model,
            epsilon=5.0,
            attack_features="high-medium",
            defenses=["a-green", "b-high-medium"],
            **extra,
            **_data(synth_full_dir),
        ),
    )
    cells = res[-1]["cells"]
    assert list(cells) == ["baseline", *HARDENED]
    assert all(c["status"] == "ok" for c in cells.values())
    baseline = cells["baseline"]
    if attack != "morph":
        assert baseline["asr"] > 0
    if attack != "morph" and model == "logreg":
        assert baseline["asr"] >= 0.05
    for name in HARDENED:
        assert cells[name]["asr"] == 0.0, name
    for name in ("A/green-only", "B1/high-medium"):
        assert abs(cells[name]["metrics"]["f1"] - baseline["metrics"]["f1"]) <= 0.03, name


def test_experiment_is_reproducible(tmp_path, synth_dir):
    for out in ("one", "two"):
        _run("perturb-experiment", experiment_cmd(str(tmp_path / out), **_data(synth_dir)))
    for name in ("experiment.json", "model.json", "score.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_experiment_morph_attack(tmp_path, synth_dir):
    res = _run(
        "perturb-experiment",
        experiment_cmd(
            str(tmp_path),
            attack="morph",
            morph_map=str(synth_dir / "morphs.json"),
            defenses=["a-green", "b-high"],
            phase="inference-only",
            **_data(synth_dir),
        ),
    )
    cells = res[-1]["cells"]
    assert list(cells) == ["baseline", "A/green-only", "B2/high"]
    assert cells["A/green-only"]["asr"] == 0.0
    assert cells["B2/high"]["asr"] == 0.0
    attack = json.loads((tmp_path / "experiment.json").read_text())["payload"]["attack"]
    assert attack["level"] == 4
    assert "magnitude" in attack


def test_experiment_morph_needs_map(tmp_path, synth_dir):
    res = _run(
        "perturb-experiment", experiment_cmd(str(tmp_path), attack="morph", **_data(synth_dir))
    )
    assert res[-1]["status"] == "impossible"
    assert "morph map" in res[-1]["message"]


def test_synth(tmp_path):
    res = _run("perturb-synth", synth_cmd(150, 0, str(tmp_path)))
    assert [r["artifact"] for r in res[:-1]] == ["flows", "catalog", "morphs"]
    assert res[-1]["n_rows"] == 150
    res = _run("perturb-synth", synth_cmd(10, 0, str(tmp_path / "small")))
    assert res[-1]["status"] == "impossible"
    assert not (tmp_path / "small").exists()


@pytest.mark.parametrize(
    "kwargs, code",
    [
        (dict(out_dir="{tmp}", catalog="builtin:unsw-nb15", fixture="{tmp}/none.json"), 2),
        (dict(out_dir=None, **UNSW), 1),
    ],
)
def test_cmdline_exits_with_error_code(tmp_path, monkeypatch, kwargs, code):
    monkeypatch.setattr(common, "_from_cmdline", lambda: True)
    kwargs = {k: v.format(tmp=tmp_path) if isinstance(v, str) else v for k, v in kwargs.items()}
    gen = run_guarded("perturb-score", score_cmd(**kwargs))
    with pytest.raises(SystemExit) as exc:
        records = []
        for rec in gen:
            records.append(rec)
    assert exc.value.code == code
    # the record is handed out before the exit
    assert records[-1]["exit_code"] == code


def test_api_keeps_running_after_error(tmp_path):
    assert not common._from_cmdline()
    res = _run(
        "perturb-score",
        score_cmd(str(tmp_path), catalog="builtin:unsw-nb15", fixture=str(tmp_path / "none.json")),
    )
    assert res[-1]["exit_code"] == 2
