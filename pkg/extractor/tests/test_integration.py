"""End-to-end across the file contract: extract a pair, then stitch it.

Both sides go through their CLIs, so this exercises exactly the surfaces
a user touches: PNG files in, correspondence JSON across, mosaic and
metric report out.
"""

import json

import cv2

from linestitch.cli import main as stitch_main
from stitchextract.cli import main as extract_main

from test_extractor import warped_pair


def test_extract_then_stitch(tmp_path):
    target, reference, _ = warped_pair(21)
    tp = tmp_path / "target.png"
    rp = tmp_path / "reference.png"
    cv2.imwrite(str(tp), cv2.cvtColor(target, cv2.COLOR_RGB2BGR))
    cv2.imwrite(str(rp), cv2.cvtColor(reference, cv2.COLOR_RGB2BGR))
    corr = tmp_path / "corr.json"

    rc = extract_main(["--a", str(tp), "--b", str(rp), "--out", str(corr)])
    assert rc == 0

    out = tmp_path / "mosaic.png"
    report_path = tmp_path / "report.json"
    rc = stitch_main([
        "stitch", "--target", str(tp), "--reference", str(rp),
        "--corr", str(corr), "--out", str(out), "--report", str(report_path),
        "--mesh-cells", "16", "--seed", "4",
    ])
    assert rc == 0
    assert out.exists()

    report = json.loads(report_path.read_text())
    assert report["m_points"] >= 20
    assert report["err_mg"] < 2.0
    assert report["n_overlap"] > 10000

    mosaic = cv2.imread(str(out), cv2.IMREAD_UNCHANGED)
    assert mosaic is not None
    assert mosaic.shape[0] >= 360 and mosaic.shape[1] >= 480
