import json
import math
import os
import sys
import tempfile

import _cardioforge as cf


def approx(a, b, tol=1e-9):
    assert abs(a - b) < tol, (a, b)


def main():
    assert cf.__version__

    with tempfile.TemporaryDirectory() as td:
        path = os.path.join(td, "tone.wav")
        sig = [0.5 * math.sin(2 * math.pi * 40 * i / 1000) for i in range(1000)]
        cf.write_wav(sig, 1000.0, path, float32=True)
        back, fs = cf.read_wav(path)
        assert fs == 1000.0
        assert len(back) == len(sig)
        assert max(abs(a - b) for a, b in zip(sig, back)) < 1e-6

        out = cf.preprocess(sig, 1000.0, "pcg", 500.0)
        assert len(out) == 500
        assert max(abs(v) for v in out) <= 1.0 + 1e-9

        m = cf.metrics(40, 40, 10, 10)
        approx(m["metrics"]["acc"], 0.8)
        approx(m["metrics"]["uar"], 0.8)
        assert m["counts"]["tp"] == 40

        fpr, tpr, auc = cf.roc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        approx(auc, 1.0)
        assert fpr[0] == 0.0 and tpr[-1] == 1.0

        n = cf.write_fixtures(os.path.join(td, "fx"), 4, seed=1)
        assert n == 4

        cfg = json.loads(cf.default_config())
        assert cfg["window_s"] == 4.0
        cfg["fixture"]["n_subjects"] = 4
        cfg["seed"] = 3
        run_dir = os.path.join(td, "run")
        summary = json.loads(cf.run_command("fixtures", json.dumps(cfg), run_dir))
        assert summary["subjects"] == 4
        summary = json.loads(cf.run_command("preprocess", json.dumps(cfg), run_dir))
        assert summary["records"] == 4
        assert os.path.exists(os.path.join(run_dir, "preprocessed", "manifest.jsonl"))

        try:
            cf.run_command("evaluate", json.dumps(cfg), run_dir)
        except RuntimeError as err:
            assert "model.ckpt" in str(err)
        else:
            raise AssertionError("evaluate without a model should fail")

    print("python smoke ok")


if __name__ == "__main__":
    main()
    sys.exit(0)
