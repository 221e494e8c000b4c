import json

import pytest

import pcap_fixtures as fx
from iotguard import knn
from iotguard.cli import main
from iotguard.trace_io import read_csv

SMALL = ["--hours", "1", "--devices-per-category", "1", "--runs-per-kind", "2"]


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["synth", "--mode", "corpus", "--seed", "3", "-o", str(out)] + SMALL) == 0
    return out


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 1


def test_unknown_flag_is_usage_error(capsys):
    assert main(["features", "x.csv", "--bogus"]) == 1
    assert main(["features", "x.csv", "--interval", "0"]) == 1
    assert main(["train", "x.csv", "--k", "4"]) == 1


def test_data_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp_us,device\n")
    assert main(["features", str(bad)]) == 2
    assert main(["features", str(tmp_path / "missing.csv")]) == 2
    junk = tmp_path / "junk.pcap"
    junk.write_bytes(b"not a capture")
    assert main(["ingest", str(junk)]) == 2


def test_synth_corpus_files(corpus_dir):
    for name in ("benign.csv", "attack.csv", "labels.csv"):
        assert (corpus_dir / name).exists()
        manifest = json.loads((corpus_dir / f"{name}.manifest.json").read_text())
        assert manifest["subcommand"] == "synth" and manifest["seed"] == 3
    assert len(read_csv((corpus_dir / "benign.csv").read_text())) > 0


def test_ingest_golden_capture(tmp_path, capsys):
    cap = tmp_path / "one.pcap"
    cap.write_bytes(fx.SYN_LE)
    assert main(["ingest", str(cap)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[1] == "100000005,66:77:88:99:aa:bb,192.168.1.2,8.8.8.8,TCP,60,true"


def test_features_train_classify(corpus_dir, tmp_path, capsys):
    feats, model, preds = tmp_path / "f.csv", tmp_path / "m.knn", tmp_path / "p.csv"
    assert main(["features", str(corpus_dir / "benign.csv"), "--labels", str(corpus_dir / "labels.csv"),
                 "--origin", "0", "-o", str(feats)]) == 0
    assert main(["train", str(feats), "--k", "3", "-o", str(model)]) == 0
    assert knn.deserialize(model.read_bytes()).k == 3
    assert main(["classify", str(model), str(feats), "-o", str(preds)]) == 0
    lines = preds.read_text().splitlines()
    assert lines[0] == "device,window_index,label,mean_neighbor_distance"
    assert len(lines) == len(feats.read_text().splitlines())
    manifest = json.loads((tmp_path / "p.csv.manifest.json").read_text())
    assert manifest["inputs"] == [str(model), str(feats)]


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["synth", "--mode", "benign", "--category", "hub", "--duration", "300", "--seed", "8"]
    assert main(args + ["-o", str(a)]) == 0
    assert main(args + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["synth", "--mode", "attack", "--attack", "icmp", "--rate", "30", "--duration", "5",
                 "-o", str(a)]) == 0
    assert set(ln.split(",")[4] for ln in a.read_text().splitlines()[1:]) == {"ICMP"}


def test_synth_profile_override(tmp_path):
    out = tmp_path / "cam.csv"
    assert main(["synth", "--mode", "benign", "--category", "camera", "--duration", "3600",
                 "--set", "camera.protocol_mix=0:0:1:0", "-o", str(out)]) == 0
    assert set(ln.split(",")[4] for ln in out.read_text().splitlines()[1:]) == {"UDP"}
    assert main(["synth", "--mode", "benign", "--set", "camera.nonsense=1"]) == 1


def test_sweep_single_interval_equals_eval(tmp_path, capsys):
    ev, sw = tmp_path / "eval.csv", tmp_path / "sweep.csv"
    assert main(["eval", "--interval", "24", "--seed", "2", "-o", str(ev)] + SMALL) == 0
    assert main(["sweep", "--intervals", "24", "--seed", "2", "-o", str(sw)] + SMALL) == 0
    overall = [ln for ln in ev.read_text().splitlines() if ln.startswith("overall")][0].split(",")[3]
    row = sw.read_text().splitlines()[1].split(",")
    assert row[0] == "24" and row[1] == overall


def test_minimize_and_importance(tmp_path, capsys):
    curve, model = tmp_path / "curve.csv", tmp_path / "small.knn"
    assert main(["minimize", "--threshold", "0.9", "--step", "0.3", "--model-out", str(model),
                 "-o", str(curve)] + SMALL) == 0
    assert curve.read_text().startswith("train_size,accuracy\n")
    assert knn.deserialize(model.read_bytes()).n_rows > 0
    assert main(["importance", "--repeats", "2"] + SMALL) == 0
    assert capsys.readouterr().out.startswith("feature,raw_drop,relative_importance\n")


def test_simulate_and_bench(corpus_dir, tmp_path, capsys):
    feats, model, log = tmp_path / "f.csv", tmp_path / "m.knn", tmp_path / "events.jsonl"
    main(["features", str(corpus_dir / "benign.csv"), "--labels", str(corpus_dir / "labels.csv"), "-o", str(feats)])
    flood_feats = tmp_path / "a.csv"
    main(["features", str(corpus_dir / "attack.csv"), "--labels", str(corpus_dir / "labels.csv"),
          "-o", str(flood_feats)])
    rows = feats.read_text() + "".join(
        ln.rsplit(",", 1)[0] + ",DDoS\n" for ln in flood_feats.read_text().splitlines()[1:])
    (tmp_path / "all.csv").write_text(rows)
    assert main(["train", str(tmp_path / "all.csv"), "-o", str(model)]) == 0
    assert main(["simulate", "--model", str(model), "--trace", str(corpus_dir / "benign.csv"),
                 "--duration", "240", "-o", str(log)]) == 0
    events = [json.loads(ln) for ln in log.read_text().splitlines()]
    assert {e["event"] for e in events} >= {"Joined", "Classified"}
    assert main(["bench", "--model", str(model), "--features", str(feats), "--trials", "10"]) == 0
    assert capsys.readouterr().out.startswith("rows,trials,mean_ms,p95_ms,model_bytes\n")
