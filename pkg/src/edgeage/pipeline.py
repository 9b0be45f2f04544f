"""End-to-end orchestration: preprocessing store, training runs for both
stages, the young-to-old inference chain, and the ablation harness."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .cyclegan import CycleGanModels, ImagePool, make_optimizers, train_epoch, translate
from .data import FallbackEmbedder, ManifestEntry, age_group, embed, split_by_age
from .edge2face import (E2FGenerator, IdentityEmbedding, MultiScaleDiscriminator, load_embedding,
                        make_conditional_input, make_e2f_optimizers, save_embedding,
                        synthesize_face, train_epoch_e2f)
from .edgemap import (GREEN, RED, BoundingBox, EdgeMap, LandmarkSet, colorize_interior_canny,
                      compose_edge_map, canny, edge_to_array, expand_roi, face_polygon,
                      filter_interior_canny, image_to_array, load_edge_map, load_landmarks,
                      rasterize_landmark_contour, save_edge_map)
from .errors import ConfigError, ContractError, DataError
from .images import Image, crop, load_image, luma, resize_bilinear, save_image
from .report import plot_loss_curves, save_image_grid, save_metrics_csv

log = logging.getLogger(__name__)

E2E_NETS = ("gen_xy", "gen_yx", "disc_x", "disc_y")
E2E_FIELDS = ("epoch", "loss_G_total", "loss_D_X", "loss_D_Y", "loss_cyc")
E2F_FIELDS = ("epoch", "loss_D", "loss_G_adv", "loss_FM", "train_L1")


def _rngs(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


# -- preprocessing -------------------------------------------------------------


def build_edge_map(img: Image, lm: LandmarkSet, box: BoundingBox, cfg: RunConfig,
                   filter_interior=False):
    """ROI expansion, crop, resize, canny + contour composition for one face.

    Returns (edge map, resized face crop, landmarks in crop coordinates).
    """
    size = cfg.image_size
    bounds = BoundingBox(0, 0, img.width, img.height)
    roi = expand_roi(box, 1.5, bounds)
    face = resize_bilinear(crop(img, roi.x, roi.y, roi.w, roi.h), size, size)
    scale = np.array([size / roi.w, size / roi.h])
    pts = (lm.points - np.array([roi.x, roi.y], float)) * scale
    lm_crop = LandmarkSet(np.clip(pts, [0.0, 0.0], [size - 1.0, size - 1.0]))
    canny_mask = canny(luma(face), cfg.canny_sigma, cfg.canny_low, cfg.canny_high)
    contour_mask = rasterize_landmark_contour(lm_crop, (size, size))
    edge = compose_edge_map(canny_mask, contour_mask, face_polygon(lm_crop))
    if filter_interior:
        edge = filter_interior_canny(edge)
    return edge, face, lm_crop


def preprocess(entries, cfg: RunConfig, out_dir, filter_interior=False):
    """Build the edge-map store: colorized maps for the edge translator
    (young RED / old GREEN), whitened maps plus faces and embeddings for the
    face synthesizer. Per-entry failures are logged and skipped; aborts only
    if every entry fails.
    """
    out_dir = Path(out_dir)
    for sub in ("e2e/young", "e2e/old", "e2f", "faces", "embeds"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    embedder = FallbackEmbedder()
    index = []
    failures = []
    for i, entry in enumerate(entries):
        stem = f"{i:04d}"
        try:
            img = load_image(entry.image_path)
            lm = load_landmarks(entry.landmark_path, image_size=(img.width, img.height))
            edge, face, _ = build_edge_map(img, lm, entry.box, cfg, filter_interior=filter_interior)
            group = age_group(entry.age)
            if group is not None:
                color = RED if group == "young" else GREEN
                save_edge_map(colorize_interior_canny(edge, color), out_dir / "e2e" / group / stem)
            save_edge_map(edge, out_dir / "e2f" / stem)  # already whitened
            save_image(face, out_dir / "faces" / f"{stem}.png")
            embedding = embed(entry, embedder)
            save_embedding(embedding, out_dir / "embeds" / f"{stem}.txt")
            index.append({"stem": stem, "group": group or "mid", "age": entry.age})
        except (DataError, ContractError) as exc:
            failures.append((entry.image_path, str(exc)))
            log.warning("preprocess: skipping %s: %s", entry.image_path, exc)
    if entries and not index:
        raise DataError(f"preprocess: all {len(entries)} entries failed; first error: {failures[0][1]}")
    with open(out_dir / "index.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=("stem", "group", "age"))
        writer.writeheader()
        writer.writerows(index)
    return index, failures


def load_store_index(store_dir):
    path = Path(store_dir) / "index.csv"
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot read store index {path}: {exc}") from exc


def load_e2e_arrays(store_dir):
    """(young stack, old stack) of colorized edge maps as (N, 3, H, W) float32."""
    store_dir = Path(store_dir)
    stacks = {}
    for group in ("young", "old"):
        rows = [r for r in load_store_index(store_dir) if r["group"] == group]
        arrays = [edge_to_array(load_edge_map(store_dir / "e2e" / group / r["stem"])) for r in rows]
        if not arrays:
            raise DataError(f"store {store_dir} has no {group} edge maps")
        stacks[group] = np.stack(arrays)
    return stacks["young"], stacks["old"]


def load_e2f_arrays(store_dir):
    """(conditional inputs (N, 4, H, W), faces (N, 3, H, W), stems)."""
    store_dir = Path(store_dir)
    rows = load_store_index(store_dir)
    conds, faces, stems = [], [], []
    for r in rows:
        stem = r["stem"]
        edge = load_edge_map(store_dir / "e2f" / stem)
        embedding = load_embedding(store_dir / "embeds" / f"{stem}.txt")
        face = load_image(store_dir / "faces" / f"{stem}.png")
        conds.append(make_conditional_input(edge, embedding).data)
        faces.append(image_to_array(face))
        stems.append(stem)
    if not conds:
        raise DataError(f"store {store_dir} is empty")
    return np.stack(conds), np.stack(faces), stems


# -- training -------------------------------------------------------------------


def train_e2e(store_dir, cfg: RunConfig, out_dir):
    """Train the two-generator edge translator; writes four checkpoints,
    metrics.csv, and a loss-curve figure. Returns the metric rows."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    young, old = load_e2e_arrays(store_dir)
    rng_init, rng_train, rng_pool_x, rng_pool_y = _rngs(cfg.seed, 4)
    models = CycleGanModels(cfg, rng=rng_init)
    optimizers = make_optimizers(models, cfg)
    pools = {"x": ImagePool(cfg.pool_size, rng_pool_x), "y": ImagePool(cfg.pool_size, rng_pool_y)}
    rows = []
    for epoch in range(1, cfg.epochs + 1):
        metrics = train_epoch(young, old, models, optimizers, pools, cfg, rng_train, epoch=epoch)
        rows.append({"epoch": epoch, **metrics})
        if epoch == 1 or epoch % 25 == 0:
            log.info("e2e epoch %d: %s", epoch, {k: round(v, 4) for k, v in metrics.items()})
        if cfg.early_stop_loss is not None and metrics["loss_G_total"] < cfg.early_stop_loss:
            log.info("e2e early stop at epoch %d (loss_G_total below %s)", epoch, cfg.early_stop_loss)
            break
    for name, net in models.nets().items():
        save_checkpoint(out_dir / f"{name}.ckpt", net)
    save_metrics_csv(out_dir / "metrics.csv", rows, E2E_FIELDS)
    plot_loss_curves(rows, E2E_FIELDS, out_dir / "loss_curves.png", title="edge translator training")
    return rows


def train_e2f(store_dir, cfg: RunConfig, out_dir):
    """Train the edge-to-face stage; writes generator/discriminator
    checkpoints, metrics.csv, and a loss-curve figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    conds, faces, _ = load_e2f_arrays(store_dir)
    rng_init, rng_train = _rngs(cfg.seed, 2)
    gen = E2FGenerator(base=cfg.gen_base_channels, n_res=cfg.n_res_blocks, dropout=cfg.dropout, rng=rng_init)
    disc = MultiScaleDiscriminator(in_ch=7, base=cfg.disc_base_channels, rng=rng_init)
    optimizers = make_e2f_optimizers(gen, disc, cfg)
    rows = []
    for epoch in range(1, cfg.epochs + 1):
        metrics = train_epoch_e2f(conds, faces, gen, disc, optimizers, cfg, rng_train, epoch=epoch)
        rows.append({"epoch": epoch, **metrics})
        if epoch == 1 or epoch % 25 == 0:
            log.info("e2f epoch %d: %s", epoch, {k: round(v, 4) for k, v in metrics.items()})
        if cfg.early_stop_loss is not None:
            total_g = metrics["loss_G_adv"] + cfg.lambda_fm * metrics["loss_FM"]
            if total_g < cfg.early_stop_loss:
                log.info("e2f early stop at epoch %d", epoch)
                break
    save_checkpoint(out_dir / "e2f_gen.ckpt", gen)
    save_checkpoint(out_dir / "e2f_disc.ckpt", disc)
    save_metrics_csv(out_dir / "metrics.csv", rows, E2F_FIELDS)
    plot_loss_curves(rows, E2F_FIELDS, out_dir / "loss_curves.png", title="edge-to-face training")
    return rows


def load_e2e_models(models_dir, cfg: RunConfig) -> CycleGanModels:
    models = CycleGanModels(cfg, rng=np.random.default_rng(cfg.seed))
    for name, net in models.nets().items():
        load_checkpoint(Path(models_dir) / f"{name}.ckpt", net)
    return models


def load_e2f_generator(models_dir, cfg: RunConfig) -> E2FGenerator:
    gen = E2FGenerator(base=cfg.gen_base_channels, n_res=cfg.n_res_blocks,
                       dropout=cfg.dropout, rng=np.random.default_rng(cfg.seed))
    load_checkpoint(Path(models_dir) / "e2f_gen.ckpt", gen)
    return gen


# -- inference -------------------------------------------------------------------


def infer(image_path, landmarks_path, box: BoundingBox, cfg: RunConfig, models_dir,
          direction, out_dir, save_intermediates=False, embedding_path=None):
    """The full aging chain on one face: edge map, colorize for the source
    domain, edge translation, identity embedding, face synthesis.

    Checkpoints are loaded and validated before any computation. Returns the
    path of the synthesized image.
    """
    if direction not in ("young-to-old", "old-to-young"):
        raise ConfigError(f"direction must be young-to-old or old-to-young, got {direction!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    models = load_e2e_models(models_dir, cfg)
    e2f_gen = load_e2f_generator(models_dir, cfg)

    img = load_image(image_path)
    lm = load_landmarks(landmarks_path, image_size=(img.width, img.height))
    edge, _face, _lm_crop = build_edge_map(img, lm, box, cfg)
    source_color = RED if direction == "young-to-old" else GREEN
    colored = colorize_interior_canny(edge, source_color)
    translated = translate(colored, direction, models)

    if embedding_path is not None:
        embedding = load_embedding(embedding_path)
    else:
        face_crop = crop(img, box.x, box.y, box.w, box.h)
        embedding = FallbackEmbedder().embed_crop(face_crop)

    out_img = synthesize_face(translated, embedding, e2f_gen)
    stem = Path(str(image_path)).stem
    out_path = out_dir / f"{stem}.{direction}.png"
    save_image(out_img, out_path)

    if save_intermediates:
        save_edge_map(colored, out_dir / f"{stem}.input_edge")
        save_edge_map(translated, out_dir / f"{stem}.translated_edge")
        face_crop_resized = resize_bilinear(crop(img, box.x, box.y, box.w, box.h),
                                            cfg.image_size, cfg.image_size)
        save_image_grid(
            [[face_crop_resized, colored.pixels, translated.pixels, out_img]],
            out_dir / f"{stem}.chain.png",
            col_labels=["input face", "input edge", "translated edge", "output face"],
        )
    return out_path


# -- ablation ---------------------------------------------------------------------


def ablate(entries, cfg: RunConfig, out_dir, grid_samples=4):
    """Train the face synthesizer twice with identical budgets: once on full
    edge maps, once with interior canny filtered out. Emits per-variant
    metrics CSVs, a side-by-side sample grid, and a comparison figure; draws
    no conclusions beyond completing both runs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    for variant, flt in (("full", False), ("filtered", True)):
        vdir = out_dir / variant
        store = vdir / "store"
        preprocess(entries, cfg, store, filter_interior=flt)
        rows = train_e2f(store, cfg, vdir / "model")
        results[variant] = {"store": store, "model": vdir / "model", "rows": rows}

    summary_rows = [
        {"variant": variant, "epochs": len(res["rows"]),
         "final_train_L1": res["rows"][-1]["train_L1"],
         "final_loss_FM": res["rows"][-1]["loss_FM"]}
        for variant, res in results.items()
    ]
    with open(out_dir / "ablation_summary.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=("variant", "epochs", "final_train_L1", "final_loss_FM"))
        writer.writeheader()
        writer.writerows(summary_rows)

    combined = []
    for res in results.values():
        combined.append(res["rows"])
    curves = [{"epoch": a["epoch"], "train_L1_full": a["train_L1"], "train_L1_filtered": b["train_L1"]}
              for a, b in zip(combined[0], combined[1])]
    plot_loss_curves(curves, ("epoch", "train_L1_full", "train_L1_filtered"),
                     out_dir / "ablation_curves.png", title="interior-canny ablation")

    grid_rows = []
    labels = []
    for variant, res in results.items():
        gen = load_e2f_generator(res["model"], cfg)
        store = res["store"]
        index = load_store_index(store)[:grid_samples]
        edges, synths, truths = [], [], []
        for r in index:
            stem = r["stem"]
            edge = load_edge_map(store / "e2f" / stem)
            embedding = load_embedding(store / "embeds" / f"{stem}.txt")
            synth = synthesize_face(edge, embedding, gen)
            edges.append(edge.pixels)
            synths.append(synth)
            truths.append(load_image(store / "faces" / f"{stem}.png"))
        grid_rows.extend([edges, synths])
        labels.extend([f"{variant} edges", f"{variant} output"])
    grid_rows.append(truths)
    labels.append("ground truth")
    save_image_grid(grid_rows, out_dir / "ablation_grid.png", row_labels=labels,
                    title="full vs filtered interior canny")
    return results, summary_rows
