"""Two-phase training: rewriter pre-training on gold questions, then reader + scorer on answers."""
import csv
import json
import logging
import math
import os

import numpy as np

from . import tensor as T
from .metrics import evaluate_predictions

logger = logging.getLogger(__name__)

LOG_FIELDS = ["epoch", "split", "em", "f1", "loss"]
PHASE_DOM, PHASE_E2E = 1, 2


class Divergence(RuntimeError):
    def __init__(self, epoch, last_checkpoint):
        super().__init__(f"loss became non-finite in epoch {epoch}; last good checkpoint: {last_checkpoint}")
        self.epoch = epoch
        self.last_checkpoint = last_checkpoint


def meta_arrays(cfg, epoch=None):
    out = {f"meta/config_sha256/{cfg.digest()}": np.zeros(1), "meta/seed": np.array([float(cfg.seed)])}
    if epoch is not None:
        out["meta/epoch"] = np.array([float(epoch)])
    return out


def save_state(path, system, optimizer, cfg, epoch):
    arrays = dict(meta_arrays(cfg, epoch))
    arrays.update(system.arrays())
    if optimizer is not None:
        arrays.update(optimizer.state_arrays())
    T.save_checkpoint(path, arrays)


def resume_state(path, system, optimizer=None):
    """Load parameters (and optimiser accumulators); returns the epoch to run next."""
    arrays = T.load_checkpoint(path)
    system.load_arrays(arrays)
    if optimizer is not None:
        optimizer.load_state_arrays(arrays)
    return int(arrays.get("meta/epoch", np.array([-1.0]))[0]) + 1


class MetricLog:
    def __init__(self, path=None, append=False):
        self.path = path
        self.rows = []
        if path and not (append and os.path.exists(path)):
            with open(path, "w", newline="") as fh:
                csv.writer(fh).writerow(LOG_FIELDS)

    def write(self, **row):
        self.rows.append(row)
        if self.path:
            with open(self.path, "a", newline="") as fh:
                csv.writer(fh).writerow(["" if row.get(k) is None else _fmt(row.get(k)) for k in LOG_FIELDS])


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def epoch_rng(cfg, phase, epoch):
    return np.random.default_rng([cfg.seed, phase, epoch])


def _batches(order, size):
    for k in range(0, len(order), size):
        yield order[k:k + size]


def dom_token_accuracy(system, examples):
    correct = total = 0
    with T.no_grad():
        for ex in examples:
            _, c, n = system.dom.loss(ex.query_tokens, ex.passage_tokens, ex.question_tokens)
            correct += c
            total += n
    return correct / max(total, 1)


def train_dom(system, train, cfg, dev=None, log=None, ckpt_dir=None, start_epoch=0, epochs=None,
              stop_when=None, optimizer=None):
    """Minimise teacher-forced question NLL over ``train``. Returns the per-epoch history."""
    params = system.store.trainable("dom/")
    opt = optimizer or T.AdaDelta(params, cfg.rho, cfg.epsilon, cfg.lr)
    log = log or MetricLog()
    epochs = cfg.dom_epochs if epochs is None else epochs
    train = [ex for ex in train if ex.question_tokens]
    history = []
    last = None
    best = math.inf
    for epoch in range(start_epoch, epochs):
        rng = epoch_rng(cfg, PHASE_DOM, epoch)
        total = 0.0
        for batch in _batches(rng.permutation(len(train)), cfg.batch):
            opt.zero_grad()
            for k in batch:
                ex = train[k]
                loss, _, _ = system.dom.loss(ex.query_tokens, ex.passage_tokens, ex.question_tokens, True, rng)
                if not np.isfinite(loss.item()):
                    raise Divergence(epoch, last)
                total += loss.item()
                T.backward(loss * (1.0 / len(batch)))
            opt.step()
        row = {"epoch": epoch, "split": "train", "em": None, "f1": None, "loss": total / max(len(train), 1)}
        if dev:
            with T.no_grad():
                dev_loss = sum(system.dom.loss(e.query_tokens, e.passage_tokens, e.question_tokens)[0].item()
                               for e in dev if e.question_tokens) / len(dev)
            row["dev_loss"] = dev_loss
        log.write(**row)
        history.append(row)
        if ckpt_dir:
            last = os.path.join(ckpt_dir, "dom_last.krd")
            save_state(last, system, opt, cfg, epoch)
            score = row.get("dev_loss", row["loss"])
            if score < best:
                best = score
                save_state(os.path.join(ckpt_dir, "dom_best.krd"), system, None, cfg, epoch)
        logger.info("dom epoch %d loss %.4f", epoch, row["loss"])
        if stop_when is not None and stop_when(system, row):
            break
    return history


def make_candidates(system, examples, use_dom=True):
    """Candidate questions per example id; the rewriter is frozen, so these are computed once."""
    out = {}
    for ex in examples:
        out[ex.id] = system.generate(ex) if use_dom else [list(ex.query_tokens)]
    return out


def predict(system, examples, candidates):
    return {ex.id: system.answer(ex, candidates[ex.id])[0].text for ex in examples}


def train_e2e(system, train, cfg, dev=None, log=None, ckpt_dir=None, start_epoch=0, epochs=None,
              stop_when=None, use_dom=True, candidates=None, optimizer=None):
    """Minimise ``-log p(gold span | P, F)`` over reader and scorer parameters, rewriter frozen."""
    params = {**system.store.trainable("reader/"), **system.store.trainable("eval/")}
    opt = optimizer or T.AdaDelta(params, cfg.rho, cfg.epsilon, cfg.lr)
    log = log or MetricLog()
    epochs = cfg.e2e_epochs if epochs is None else epochs
    valid = [ex for ex in train if ex.answers and 0 <= ex.answers[0].start <= ex.answers[0].end < len(ex.passage)]
    if len(valid) < len(train):
        logger.warning("e2e: skipped %d examples with out-of-range gold spans", len(train) - len(valid))
    dev = dev if dev is not None else valid
    if candidates is None:
        candidates = make_candidates(system, {e.id: e for e in valid + list(dev)}.values(), use_dom)
    history = []
    last = None
    best = -1.0
    for epoch in range(start_epoch, epochs):
        rng = epoch_rng(cfg, PHASE_E2E, epoch)
        total = 0.0
        for batch in _batches(rng.permutation(len(valid)), cfg.batch):
            opt.zero_grad()
            for k in batch:
                ex = valid[k]
                loss = system.e2e_loss(ex, candidates[ex.id], True, rng)
                if not np.isfinite(loss.item()):
                    raise Divergence(epoch, last)
                total += loss.item()
                T.backward(loss * (1.0 / len(batch)))
            opt.step()
        scores = evaluate_predictions(predict(system, dev, candidates), dev)
        row = {"epoch": epoch, "split": "dev", "em": scores["em"], "f1": scores["f1"],
               "loss": total / max(len(valid), 1)}
        log.write(**row)
        history.append(row)
        if ckpt_dir:
            last = os.path.join(ckpt_dir, "e2e_last.krd")
            save_state(last, system, opt, cfg, epoch)
            if scores["em"] > best:
                best = scores["em"]
                save_state(os.path.join(ckpt_dir, "e2e_best.krd"), system, None, cfg, epoch)
        logger.info("e2e epoch %d loss %.4f dev em %.2f f1 %.2f", epoch, row["loss"], scores["em"], scores["f1"])
        if stop_when is not None and stop_when(system, row):
            break
    return history


def write_candidate_dump(path, candidates_scored):
    """``example-id TAB rank TAB score TAB tokens`` per candidate."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex_id, cands in candidates_scored.items():
            for rank, (tokens, score) in enumerate(cands, 1):
                fh.write(f"{ex_id}\t{rank}\t{score:.6f}\t{' '.join(tokens)}\n")


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
