"""Identity-conditioned edge-to-face synthesis.

The generator consumes a 4-channel input (whitened edge map plus a tiled
512-d identity embedding) and renders the face; two PatchGAN discriminators
at full and half resolution judge (condition, face) pairs, with a feature
matching loss over their layer activations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .cyclegan import PatchDiscriminator, ResnetGenerator, generator_log_loss
from .edgemap import BLACK, WHITE, EdgeMap, array_to_image, edge_to_array
from .errors import ContractError, DataError, NumericError, ShapeError
from .images import Image
from .nn import Module, gan_log_losses, l1_loss
from .optim import Adam

EMBED_DIM = 512


@dataclass
class IdentityEmbedding:
    """Unit-norm 512-d identity vector with a provenance tag."""

    vector: np.ndarray
    source: str = "file"  # "file" or "fallback"

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float32).reshape(-1)
        if v.shape != (EMBED_DIM,):
            raise DataError(f"identity embedding must have {EMBED_DIM} values, got {v.shape}")
        norm = float(np.linalg.norm(v))
        if not np.isfinite(norm) or norm == 0.0:
            raise DataError("identity embedding has zero or non-finite norm")
        self.vector = (v / norm).astype(np.float32)


def load_embedding(path) -> IdentityEmbedding:
    """512 whitespace-separated decimals; normalized on load."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise DataError(f"cannot read embedding {path}: {exc}") from exc
    try:
        values = np.array([float(t) for t in tokens], dtype=np.float32)
    except ValueError as exc:
        raise DataError(f"corrupt embedding file {path}: {exc}") from exc
    if values.size != EMBED_DIM:
        raise DataError(f"corrupt embedding file {path}: expected {EMBED_DIM} values, got {values.size}")
    return IdentityEmbedding(values, source="file")


def save_embedding(embedding: IdentityEmbedding, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(f"{v:.8e}" for v in embedding.vector) + "\n")


def tile_identity(embedding, height: int, width: int) -> np.ndarray:
    """Repeat the 512 values row-major (height*width / 512) times.

    Exactly invertible: the first 512 entries of the flattened map recover
    the embedding.
    """
    vec = embedding.vector if isinstance(embedding, IdentityEmbedding) else np.asarray(embedding, dtype=np.float32)
    vec = vec.reshape(-1)
    if vec.size != EMBED_DIM:
        raise ShapeError(f"tile_identity needs a {EMBED_DIM}-d vector, got {vec.size}")
    if (height * width) % EMBED_DIM != 0:
        raise ShapeError(
            f"tile_identity: height*width ({height}*{width}={height * width}) must be divisible by {EMBED_DIM}")
    reps = (height * width) // EMBED_DIM
    return np.tile(vec, reps).reshape(height, width)


def read_back_identity(tiled: np.ndarray) -> np.ndarray:
    """Left inverse of tile_identity."""
    return tiled.reshape(-1)[:EMBED_DIM].copy()


def make_conditional_input(edge: EdgeMap, embedding) -> Tensor:
    """4-channel tensor: channels 0-2 the whitened edge map in [-1, 1],
    channel 3 the tiled identity map (fed unscaled)."""
    px = edge.pixels.reshape(-1, 3)
    colored = ~(
        (px == np.array(BLACK, np.uint8)).all(axis=1)
        | (px == np.array(WHITE, np.uint8)).all(axis=1)
    )
    if colored.any():
        raise ContractError("conditional input requires a whitened edge map (colored strokes present)")
    w, h = edge.size
    tiled = tile_identity(embedding, h, w).astype(np.float32)
    stacked = np.concatenate([edge_to_array(edge), tiled[None]], axis=0)
    return Tensor(stacked)


class E2FGenerator(ResnetGenerator):
    """Same skeleton as the edge translator, 4 channels in / 3 out."""

    def __init__(self, base=32, n_res=4, dropout=0.0, rng=None):
        super().__init__(in_ch=4, out_ch=3, base=base, n_res=n_res, dropout=dropout, rng=rng)


class MultiScaleDiscriminator(Module):
    """Two conditional PatchGANs: full resolution and 2x average-pooled."""

    def __init__(self, in_ch=7, base=32, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.full = PatchDiscriminator(in_ch, base, rng)
        self.half = PatchDiscriminator(in_ch, base, rng)

    def forward_features(self, x):
        out_full = self.full.forward_features(x)
        out_half = self.half.forward_features(ad.avg_pool2d(x, 2))
        return [out_full, out_half]

    def forward(self, x):
        return [score for score, _ in self.forward_features(x)]


def e2f_losses(disc: MultiScaleDiscriminator, cond: Tensor, real_face: Tensor, gen_out: Tensor,
               ):
    """(loss_D, loss_G_adv, loss_FM), each averaged over discriminator scales.

    Discriminators judge the conditional input concatenated with the real or
    generated face; loss_FM is the mean L1 between real and fake feature taps
    (real taps detached -- the generator chases them, they do not move).
    """
    if real_face.data.shape != gen_out.data.shape:
        raise ShapeError(f"e2f_losses: real {real_face.data.shape} vs fake {gen_out.data.shape}")
    pair_real = ad.concat([cond, real_face], axis=1)
    pair_fake_live = ad.concat([cond, gen_out], axis=1)
    pair_fake_detached = ad.concat([cond, gen_out.detach()], axis=1)

    feats_real = disc.forward_features(pair_real)
    feats_fake = disc.forward_features(pair_fake_live)
    scores_fake_detached = disc(pair_fake_detached)

    n_scales = len(feats_real)
    loss_d = None
    loss_g = None
    loss_fm = None
    n_taps = 0
    for (score_real, taps_real), (score_fake, taps_fake), score_det in zip(
            feats_real, feats_fake, scores_fake_detached):
        d_scale, _ = gan_log_losses(score_real, score_det)
        g_scale = generator_log_loss(score_fake)
        loss_d = d_scale if loss_d is None else loss_d + d_scale
        loss_g = g_scale if loss_g is None else loss_g + g_scale
        for tr, tf in zip(taps_real, taps_fake):
            fm = l1_loss(tf, tr.detach())
            loss_fm = fm if loss_fm is None else loss_fm + fm
            n_taps += 1
    return loss_d * (1.0 / n_scales), loss_g * (1.0 / n_scales), loss_fm * (1.0 / n_taps)


def make_e2f_optimizers(gen: E2FGenerator, disc: MultiScaleDiscriminator, cfg):
    return {
        "gen": Adam(gen.parameters(), lr=cfg.lr_g, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2),
        "disc": Adam(disc.parameters(), lr=cfg.lr_d, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2),
    }


def train_epoch_e2f(conds: np.ndarray, faces: np.ndarray, gen: E2FGenerator,
                    disc: MultiScaleDiscriminator, optimizers, cfg, rng, epoch=0):
    """One alternating G/D pass over (conditional input, face) pairs.

    `conds` is (N, 4, H, W), `faces` is (N, 3, H, W), both float32.
    Returns running means: loss_D, loss_G_adv, loss_FM, train_L1.
    """
    if len(conds) == 0:
        raise ContractError("train_epoch_e2f: empty dataset")
    if len(conds) != len(faces):
        raise ShapeError(f"conditional inputs ({len(conds)}) and faces ({len(faces)}) differ in count")
    gen.train(True)
    disc.train(True)
    bs = cfg.batch_size
    steps = len(conds) // bs
    if steps == 0:
        raise ContractError(f"batch size {bs} exceeds dataset size {len(conds)}")
    order = rng.permutation(len(conds))
    sums = {"loss_D": 0.0, "loss_G_adv": 0.0, "loss_FM": 0.0, "train_L1": 0.0}

    for step in range(steps):
        ctx = f"epoch {epoch} step {step}"
        sel = order[step * bs:(step + 1) * bs]
        cond = Tensor(conds[sel])
        real = Tensor(faces[sel])

        fake = gen(cond)
        loss_d, loss_g_adv, loss_fm = e2f_losses(disc, cond, real, fake)
        train_l1 = l1_loss(fake.detach(), real)

        optimizers["gen"].zero_grad()
        ad.backward(loss_g_adv + cfg.lambda_fm * loss_fm)
        optimizers["gen"].step()

        optimizers["disc"].zero_grad()
        ad.backward(loss_d)
        optimizers["disc"].step()

        sums["loss_D"] += _finite("loss_D", loss_d.item(), ctx)
        sums["loss_G_adv"] += _finite("loss_G_adv", loss_g_adv.item(), ctx)
        sums["loss_FM"] += _finite("loss_FM", loss_fm.item(), ctx)
        sums["train_L1"] += _finite("train_L1", train_l1.item(), ctx)

    return {key: value / steps for key, value in sums.items()}


def _finite(name, value, context):
    if not np.isfinite(value):
        raise NumericError(f"non-finite {name} ({value}) at {context}")
    return value


def synthesize_face(edge: EdgeMap, embedding, gen: E2FGenerator) -> Image:
    """Deterministic inference: whitened edge + identity -> 8-bit face image."""
    if gen is None:
        raise ContractError("synthesize_face needs a trained generator")
    cond = make_conditional_input(edge, embedding)
    gen.eval()
    try:
        out = gen(Tensor(cond.data[None])).data[0]
    finally:
        gen.train(True)
    return array_to_image(out)
