"""A loaded model answering the three scoring requests deterministically.

One session serves one model. Two families are supported:

* ``masked``  -- a bidirectional encoder (BERT-style). Chain-rule scoring
  masks each target token with only the preceding material visible;
  masked-bidirectional scoring masks each target token with everything
  else visible; next-sentence probability comes from the pretraining
  sentence-pair head when the checkpoint has one.
* ``causal``  -- an autoregressive decoder (GPT-style). Chain-rule scoring
  is ordinary next-token prediction. Masked-bidirectional requests are
  answered with the causal factorization, which is the same quantity for
  an autoregressive model; there is no sentence-pair head, so NSP requests
  get a capability error.

Sessions are deterministic: eval mode, no sampling, no gradients, float32
throughout. Context that overflows the model window is truncated from the
left (oldest tokens dropped) and the kept token count is reported.
"""

from __future__ import annotations

import torch
from transformers import AutoModelForPreTraining, AutoTokenizer

from .protocol import MODE_CAUSAL, SidecarError

FAMILIES = ("masked", "causal")


class ModelSession:
    def __init__(
        self,
        model_path: str,
        family: str = "masked",
        device: str = "cpu",
        max_window: int | None = None,
    ):
        if family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")
        self.family = family
        self.device = torch.device(device)
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = (
            AutoModelForPreTraining.from_pretrained(model_path)
            .float()
            .to(self.device)
            .eval()
        )
        limit = getattr(self.model.config, "max_position_embeddings", None) or getattr(
            self.model.config, "n_positions", None
        )
        self.max_window = min(max_window, limit) if max_window and limit else (max_window or limit)
        self.model_name = model_path

        self._bos_id = self.tokenizer.cls_token_id
        if self._bos_id is None:
            self._bos_id = self.tokenizer.bos_token_id
        self._mask_id = self.tokenizer.mask_token_id
        self._pad_id = self.tokenizer.pad_token_id
        if self._pad_id is None:
            self._pad_id = 0
        self._nsp_head = getattr(getattr(self.model, "cls", None), "seq_relationship", None)

    # -- helpers ---------------------------------------------------------

    def _content_ids(self, text: str) -> list[int]:
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def _fit_context(self, ctx_ids: list[int], reserved: int):
        """Left-truncate context so ``reserved`` more tokens still fit."""
        if self.max_window is None:
            return ctx_ids, None
        room = self.max_window - reserved
        if room < 0:
            raise SidecarError("validation", "target alone exceeds the model window")
        if len(ctx_ids) <= room:
            return ctx_ids, None
        return ctx_ids[len(ctx_ids) - room:], room

    def _forward_logits(self, input_ids: torch.Tensor, attention_mask=None, **kw):
        with torch.no_grad():
            out = self.model(input_ids=input_ids, attention_mask=attention_mask, **kw)
        logits = getattr(out, "prediction_logits", None)
        if logits is None:
            logits = out.logits
        return out, logits

    @staticmethod
    def _gather_logprobs(logits: torch.Tensor, positions, token_ids) -> list[float]:
        logprobs = torch.log_softmax(logits.float(), dim=-1)
        values = []
        for row, (pos, tok) in enumerate(zip(positions, token_ids)):
            values.append(min(float(logprobs[row, pos, tok]), 0.0))
        return values

    # -- scoring ---------------------------------------------------------

    def logprobs(self, context: str, target: str, mode: str = MODE_CAUSAL):
        """Per-token natural-log probabilities of target given context.

        Returns ``(tokens, logprobs, truncated_to)``.
        """
        tgt_ids = self._content_ids(target)
        if not tgt_ids:
            raise SidecarError("validation", "target has no tokens under this vocabulary")
        tokens = self.tokenizer.convert_ids_to_tokens(tgt_ids)
        ctx_ids = self._content_ids(context) if context else []

        if self.family == "causal":
            # for an autoregressive model the masked-bidirectional request
            # reduces to the same causal factorization
            values, truncated = self._causal_scores(ctx_ids, tgt_ids)
        elif mode == MODE_CAUSAL:
            values, truncated = self._masked_causal_scores(ctx_ids, tgt_ids)
        else:
            values, truncated = self._masked_bidirectional_scores(ctx_ids, tgt_ids)
        return tokens, values, truncated

    def _causal_scores(self, ctx_ids, tgt_ids):
        if self._bos_id is None:
            raise SidecarError("model", "causal scoring needs a BOS/CLS token")
        ctx_ids, truncated = self._fit_context(ctx_ids, reserved=1 + len(tgt_ids))
        ids = [self._bos_id] + ctx_ids + tgt_ids
        input_ids = torch.tensor([ids], device=self.device)
        _, logits = self._forward_logits(input_ids)
        logprobs = torch.log_softmax(logits[0].float(), dim=-1)
        start = 1 + len(ctx_ids)
        values = [
            min(float(logprobs[start + i - 1, tok]), 0.0)
            for i, tok in enumerate(tgt_ids)
        ]
        return values, truncated

    def _masked_causal_scores(self, ctx_ids, tgt_ids):
        """Chain rule on a masked model: token i is predicted from a masked
        slot with only the context and preceding target tokens present."""
        if self._mask_id is None:
            raise SidecarError("capability", "model has no mask token")
        sep = self.tokenizer.sep_token_id
        ctx_ids, truncated = self._fit_context(
            ctx_ids, reserved=2 + len(tgt_ids) + (1 if sep is not None else 0)
        )
        rows, positions = [], []
        for i in range(len(tgt_ids)):
            row = [self._bos_id] + ctx_ids + tgt_ids[:i] + [self._mask_id]
            positions.append(len(row) - 1)
            if sep is not None:
                row.append(sep)
            rows.append(row)
        width = max(len(r) for r in rows)
        batch = torch.full((len(rows), width), self._pad_id, device=self.device)
        mask = torch.zeros((len(rows), width), dtype=torch.long, device=self.device)
        for r, row in enumerate(rows):
            batch[r, : len(row)] = torch.tensor(row, device=self.device)
            mask[r, : len(row)] = 1
        _, logits = self._forward_logits(batch, attention_mask=mask)
        values = self._gather_logprobs(logits, positions, tgt_ids)
        return values, truncated

    def _masked_bidirectional_scores(self, ctx_ids, tgt_ids):
        """Each target token masked in turn with all other tokens visible."""
        if self._mask_id is None:
            raise SidecarError("capability", "model has no mask token")
        sep = self.tokenizer.sep_token_id
        extra = (1 if self._bos_id is not None else 0) + (1 if sep is not None else 0)
        ctx_ids, truncated = self._fit_context(ctx_ids, reserved=extra + len(tgt_ids))
        prefix = ([self._bos_id] if self._bos_id is not None else []) + ctx_ids
        base = prefix + tgt_ids + ([sep] if sep is not None else [])
        rows, positions = [], []
        for i in range(len(tgt_ids)):
            row = list(base)
            row[len(prefix) + i] = self._mask_id
            rows.append(row)
            positions.append(len(prefix) + i)
        batch = torch.tensor(rows, device=self.device)
        _, logits = self._forward_logits(batch)
        values = self._gather_logprobs(logits, positions, tgt_ids)
        return values, truncated

    def hidden_states(self, text: str):
        """Final-layer vectors for the text's content tokens.

        Returns ``(matrix, dim, truncated_to)``; special tokens are
        excluded so rows align with the text's own tokens.
        """
        ids = self._content_ids(text)
        if not ids:
            raise SidecarError("validation", "text has no tokens under this vocabulary")
        extra = 2 if self.family == "masked" else 0
        truncated = None
        if self.max_window is not None and len(ids) + extra > self.max_window:
            keep = self.max_window - extra
            ids = ids[len(ids) - keep:]
            truncated = keep
        if self.family == "masked":
            row = [self._bos_id] + ids + [self.tokenizer.sep_token_id]
            content = slice(1, 1 + len(ids))
        else:
            row = ids
            content = slice(0, len(ids))
        input_ids = torch.tensor([row], device=self.device)
        out, _ = self._forward_logits(input_ids, output_hidden_states=True)
        final = out.hidden_states[-1][0, content, :].float()
        matrix = [[float(v) for v in vec] for vec in final]
        return matrix, final.shape[1], truncated

    def nsp(self, sentence_a: str, sentence_b: str) -> float:
        """Probability that sentence B follows sentence A, in (0, 1)."""
        if self._nsp_head is None:
            raise SidecarError("capability", "model has no next-sentence head")
        enc = self.tokenizer(
            sentence_a,
            sentence_b,
            return_tensors="pt",
            truncation=True,
            max_length=self.max_window,
        ).to(self.device)
        with torch.no_grad():
            out = self.model(**enc)
        probs = torch.softmax(out.seq_relationship_logits[0].float(), dim=-1)
        p = float(probs[0])  # index 0 is the "is next" class
        return min(max(p, 1e-12), 1.0 - 1e-12)
