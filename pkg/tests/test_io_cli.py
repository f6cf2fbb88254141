import numpy as np
import pytest

from motrack import mot_io
from motrack.cli import main
from motrack.geometry import BBox
from motrack.gmc import save_warps, write_pgm
from motrack.mot_io import ParseError
from scenes import panning_scene, textured_image


def write_detections_file(path, dets):
    lines = []
    for frame in sorted(dets):
        for d in dets[frame]:
            b = d.bbox
            lines.append(
                f"{frame},-1,{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},{d.score},-1,-1,-1"
            )
    path.write_text("\n".join(lines) + "\n")


def write_gt_file(path, gt):
    lines = []
    for frame in sorted(gt):
        for oid, b in gt[frame]:
            lines.append(
                f"{frame},{oid},{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},1,-1,-1,-1"
            )
    path.write_text("\n".join(lines) + "\n")


# --- detections ----------------------------------------------------------------


def test_read_detections_field_mapping(tmp_path):
    p = tmp_path / "det.txt"
    p.write_text("1,-1,100.0,200.0,50.0,80.0,0.9,-1,-1,-1\n")
    dets = mot_io.read_detections(p)
    d = dets[1][0]
    assert d.bbox == BBox(100, 200, 50, 80)
    assert d.score == 0.9


def test_read_detections_groups_out_of_order(tmp_path):
    p = tmp_path / "det.txt"
    p.write_text(
        "3,-1,0,0,10,10,0.9,-1,-1,-1\n"
        "1,-1,5,5,10,10,0.8,-1,-1,-1\n"
        "3,-1,20,20,10,10,0.7,-1,-1,-1\n"
    )
    dets = mot_io.read_detections(p)
    assert sorted(dets) == [1, 3]
    assert [d.score for d in dets[3]] == [0.9, 0.7]


def test_read_detections_empty_file(tmp_path):
    p = tmp_path / "det.txt"
    p.write_text("")
    assert mot_io.read_detections(p) == {}


def test_read_detections_malformed_line(tmp_path):
    p = tmp_path / "det.txt"
    p.write_text("1,-1,1,2,3,4,0.5,-1,-1,-1\nnot,a,line\n")
    with pytest.raises(ParseError, match=":2"):
        mot_io.read_detections(p)


def test_read_detections_rejects_bad_extent_row(tmp_path, caplog):
    p = tmp_path / "det.txt"
    p.write_text("1,-1,0,0,-5,10,0.9,-1,-1,-1\n1,-1,0,0,5,10,0.9,-1,-1,-1\n")
    dets = mot_io.read_detections(p)
    assert len(dets[1]) == 1


# --- results --------------------------------------------------------------------


def test_write_results_deterministic(tmp_path):
    rows = [
        (2, 1, BBox(1.234, 5.678, 10, 20), 0.5),
        (1, 2, BBox(0, 0, 3, 4), 0.25),
        (1, 1, BBox(9, 9, 2, 2), 1.0),
    ]
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    mot_io.write_results(p1, rows)
    mot_io.write_results(p2, list(reversed(rows)))
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().splitlines()
    assert lines[0].startswith("1,1,")
    assert lines[1].startswith("1,2,")
    assert lines[2].startswith("2,1,")


def test_results_round_trip(tmp_path):
    rows = [(1, 3, BBox(10.25, 20.5, 30.75, 40), 0.875)]
    p = tmp_path / "res.txt"
    mot_io.write_results(p, rows)
    frames = mot_io.read_tracks(p, keep_unflagged=True)
    oid, b = frames[1][0]
    assert oid == 3
    assert (b.x, b.y, b.w, b.h) == (10.25, 20.5, 30.75, 40.0)


def test_series_round_trip(tmp_path):
    rows = [
        (1, 1, BBox(0, 0, 10, 10), 0.9),
        (5, 1, BBox(8, 0, 10, 10), 0.7),
        (2, 2, BBox(50, 50, 5, 5), 0.6),
    ]
    p = tmp_path / "res.txt"
    mot_io.write_results(p, rows)
    series = mot_io.read_results_series(p)
    assert [s.id for s in series] == [1, 2]
    assert [f for f, _, _ in series[0].entries] == [1, 5]
    assert series[0].entries[1][2] == pytest.approx(0.7)


# --- embeddings -----------------------------------------------------------------


def make_dets():
    return {
        1: [mot_io.Detection(BBox(0, 0, 10, 10), 0.9)],
        3: [
            mot_io.Detection(BBox(0, 0, 10, 10), 0.9),
            mot_io.Detection(BBox(20, 0, 10, 10), 0.8),
        ],
    }


def test_embeddings_binary_round_trip(tmp_path):
    p = tmp_path / "emb.bin"
    v = np.array([3.0, 4.0, 0.0, 0.0])
    mot_io.write_embeddings(p, [(1, 0, v), (3, 1, np.array([0, 0, 1.0, 0]))])
    dets = make_dets()
    mot_io.read_embeddings(p, dets)
    np.testing.assert_allclose(dets[1][0].embedding, [0.6, 0.8, 0, 0], atol=1e-6)
    np.testing.assert_allclose(dets[3][1].embedding, [0, 0, 1, 0], atol=1e-6)
    assert dets[3][0].embedding is None


def test_embeddings_csv_fallback(tmp_path):
    p = tmp_path / "emb.csv"
    p.write_text("1,0,1.0,0.0\n3,0,0.0,2.0\n")
    dets = make_dets()
    mot_io.read_embeddings(p, dets)
    np.testing.assert_allclose(dets[3][0].embedding, [0, 1])


def test_embeddings_csv_dim_mismatch(tmp_path):
    p = tmp_path / "emb.csv"
    p.write_text("1,0,1.0,0.0\n3,0,0.0,2.0,3.0\n")
    with pytest.raises(ParseError, match="dim"):
        mot_io.read_embeddings(p, make_dets())


def test_embeddings_unknown_detection(tmp_path):
    p = tmp_path / "emb.csv"
    p.write_text("2,0,1.0,0.0\n")
    with pytest.raises(ParseError, match="frame 2"):
        mot_io.read_embeddings(p, make_dets())


def test_embeddings_zero_vector(tmp_path):
    p = tmp_path / "emb.csv"
    p.write_text("1,0,0.0,0.0\n")
    with pytest.raises(ParseError, match="zero"):
        mot_io.read_embeddings(p, make_dets())


# --- CLI -------------------------------------------------------------------------


def test_cli_track_and_self_eval(tmp_path, capsys):
    dets, warps, gt = panning_scene(n_frames=30)
    det_file = tmp_path / "det.txt"
    warp_file = tmp_path / "warps.txt"
    out_file = tmp_path / "out.txt"
    gt_file = tmp_path / "gt.txt"
    write_detections_file(det_file, dets)
    save_warps(warp_file, {k: w for k, w in warps.items()})
    write_gt_file(gt_file, gt)

    rc = main(
        [
            "track",
            "--detections", str(det_file),
            "--output", str(out_file),
            "--gmc", f"file:{warp_file}",
        ]
    )
    assert rc == 0
    assert out_file.exists()

    rc = main(["eval", "--gt", str(out_file), "--results", str(out_file)])
    assert rc == 0
    report = capsys.readouterr().out
    assert "MOTA  1.000000" in report
    assert "IDF1  1.000000" in report


def test_cli_cmc_ablation(tmp_path, capsys):
    dets, warps, gt = panning_scene()
    det_file = tmp_path / "det.txt"
    warp_file = tmp_path / "warps.txt"
    gt_file = tmp_path / "gt.txt"
    write_detections_file(det_file, dets)
    save_warps(warp_file, warps)
    write_gt_file(gt_file, gt)

    def run(gmc_arg, out_name):
        out = tmp_path / out_name
        assert main(
            ["track", "--detections", str(det_file), "--output", str(out),
             "--gmc", gmc_arg]
        ) == 0
        assert main(["eval", "--gt", str(gt_file), "--results", str(out)]) == 0
        report = capsys.readouterr().out
        return float(report.splitlines()[0].split()[1])

    mota_with = run(f"file:{warp_file}", "with.txt")
    mota_without = run("none", "without.txt")
    assert mota_with >= 0.99
    assert mota_without < mota_with


def test_cli_determinism(tmp_path):
    dets, warps, _ = panning_scene(n_frames=25)
    det_file = tmp_path / "det.txt"
    warp_file = tmp_path / "warps.txt"
    write_detections_file(det_file, dets)
    save_warps(warp_file, warps)
    outs = []
    for name in ("a.txt", "b.txt"):
        out = tmp_path / name
        csv = tmp_path / (name + ".csv")
        main(["track", "--detections", str(det_file), "--output", str(out),
              "--gmc", f"file:{warp_file}"])
        main(["eval", "--gt", str(out), "--results", str(out),
              "--cmota-csv", str(csv)])
        outs.append((out.read_bytes(), csv.read_bytes()))
    assert outs[0] == outs[1]


def test_cli_interp(tmp_path):
    res = tmp_path / "res.txt"
    out = tmp_path / "interp.txt"
    mot_io.write_results(
        res,
        [(1, 1, BBox(0, 0, 10, 10), 0.8), (5, 1, BBox(8, 0, 10, 10), 0.8)],
    )
    assert main(["interp", "--input", str(res), "--output", str(out)]) == 0
    frames = mot_io.read_tracks(out, keep_unflagged=True)
    assert sorted(frames) == [1, 2, 3, 4, 5]
    assert frames[3][0][1].x == pytest.approx(4.0)


def test_cli_gmc_compute(tmp_path):
    base = textured_image((360, 360), seed=30)
    frame_dir = tmp_path / "frames"
    frame_dir.mkdir()
    # frame 2 content shifted by (+5, 0) relative to frame 1
    write_pgm(frame_dir / "000001.pgm", base[30:330, 30:330])
    write_pgm(frame_dir / "000002.pgm", base[30:330, 25:325])
    warp_file = tmp_path / "warps.txt"
    assert main(["gmc", "--frames", str(frame_dir), "--output", str(warp_file)]) == 0
    from motrack.gmc import load_warps

    warps = load_warps(warp_file)
    assert 2 in warps
    assert abs(warps[2].a13 - 5.0) < 0.3
    assert abs(warps[2].a23) < 0.3


def test_cli_error_exit_code(tmp_path, capsys):
    rc = main(["track", "--detections", str(tmp_path / "missing.txt"),
               "--output", str(tmp_path / "o.txt")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_cli_unknown_gmc_mode(tmp_path):
    det_file = tmp_path / "det.txt"
    det_file.write_text("1,-1,0,0,10,10,0.9,-1,-1,-1\n")
    rc = main(["track", "--detections", str(det_file),
               "--output", str(tmp_path / "o.txt"), "--gmc", "bogus"])
    assert rc == 1
