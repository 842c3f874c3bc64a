"""Training loop: cross-entropy, reduce-on-plateau, early stopping."""

import json
import time
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader

from .config import TrainConfig
from .data import MitoDataset, read_manifest, split_entries
from .model import ResUNet


def _miou_from_counts(counts: np.ndarray) -> float:
    ious = []
    for c in range(counts.shape[0]):
        tp = counts[c, c]
        denom = counts[c, :].sum() + counts[:, c].sum() - tp
        ious.append(1.0 if denom == 0 else tp / denom)
    return float(np.mean(ious))


def _validate(model, loader, loss_fn, classes: int, device) -> tuple[float, float]:
    model.eval()
    total, n = 0.0, 0
    counts = np.zeros((classes, classes), dtype=np.int64)
    with torch.no_grad():
        for img, mask in loader:
            img, mask = img.to(device), mask.to(device)
            logits = model(img)
            total += float(loss_fn(logits, mask)) * img.shape[0]
            n += img.shape[0]
            pred = logits.argmax(dim=1).cpu().numpy().ravel()
            gt = mask.cpu().numpy().ravel()
            counts += np.bincount(gt * classes + pred,
                                  minlength=classes * classes
                                  ).reshape(classes, classes)
    return total / n, _miou_from_counts(counts)


def train(cfg: TrainConfig) -> dict:
    """Train per config; writes checkpoint.pt, training_log.jsonl, metrics.json.

    Returns the final metrics dict. Deterministic for a given seed up to
    backend nondeterminism.
    """
    cfg.validate()
    torch.manual_seed(cfg.seed)
    device = torch.device("cpu")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    entries = read_manifest(cfg.dataset_dir)
    train_entries = split_entries(entries, "train")
    val_entries = split_entries(entries, "val")
    if cfg.val_max:
        val_entries = val_entries[:cfg.val_max]

    train_ds = MitoDataset(cfg.dataset_dir, train_entries, cfg.classes,
                           crop=cfg.crop if cfg.random_crop else 0,
                           flip=cfg.flip, rotate=cfg.rotate, seed=cfg.seed)
    val_ds = MitoDataset(cfg.dataset_dir, val_entries, cfg.classes)
    if len(train_ds) < cfg.batch_size:
        raise ValueError(f"train split ({len(train_ds)}) smaller than "
                         f"batch size ({cfg.batch_size})")
    loader_gen = torch.Generator().manual_seed(cfg.seed)
    # partial final batches are dropped: batch-norm needs >1 value per
    # channel, which a single 1x1 bottleneck sample cannot provide
    train_loader = DataLoader(train_ds, batch_size=cfg.batch_size,
                              shuffle=True, generator=loader_gen,
                              drop_last=True)
    val_loader = DataLoader(val_ds, batch_size=2)

    model = ResUNet(classes=cfg.classes, backbone=cfg.backbone).to(device)
    loss_fn = nn.CrossEntropyLoss()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=cfg.lr_factor, patience=cfg.lr_patience)

    best = {"val_loss": float("inf"), "val_miou": 0.0, "epoch": 0}
    stale = 0
    log_path = out / "training_log.jsonl"
    with open(log_path, "w") as log:
        for epoch in range(1, cfg.epochs + 1):
            t0 = time.perf_counter()
            model.train()
            total, n = 0.0, 0
            for img, mask in train_loader:
                img, mask = img.to(device), mask.to(device)
                optimizer.zero_grad()
                loss = loss_fn(model(img), mask)
                loss.backward()
                optimizer.step()
                total += float(loss.detach()) * img.shape[0]
                n += img.shape[0]
            train_loss = total / n
            val_loss, val_miou = _validate(model, val_loader, loss_fn,
                                           cfg.classes, device)
            scheduler.step(val_loss)
            record = {"epoch": epoch, "train_loss": train_loss,
                      "val_loss": val_loss, "val_miou": val_miou,
                      "lr": optimizer.param_groups[0]["lr"],
                      "seconds": round(time.perf_counter() - t0, 1)}
            log.write(json.dumps(record) + "\n")
            log.flush()
            print(f"[trainer] epoch {epoch}: train {train_loss:.4f} "
                  f"val {val_loss:.4f} miou {val_miou:.4f} "
                  f"({record['seconds']}s)", flush=True)
            if val_loss < best["val_loss"]:
                best = {"val_loss": val_loss, "val_miou": val_miou,
                        "epoch": epoch}
                stale = 0
                torch.save({"model": model.state_dict(),
                            "classes": cfg.classes,
                            "backbone": cfg.backbone,
                            "config": cfg.to_dict(),
                            "epoch": epoch}, out / "checkpoint.pt")
            else:
                stale += 1
                if stale > cfg.early_stop_patience:
                    print(f"[trainer] early stop at epoch {epoch}", flush=True)
                    break

    metrics = {"best_epoch": best["epoch"], "best_val_loss": best["val_loss"],
               "best_val_miou": best["val_miou"], "epochs_run": epoch,
               "classes": cfg.classes, "backbone": cfg.backbone,
               "n_train": len(train_entries), "n_val": len(val_entries)}
    with open(out / "metrics.json", "w") as f:
        json.dump(metrics, f, indent=2, sort_keys=True)
    return metrics
