"""Minimal causal transformer for desk-scale tuning, plus LoRA adapters.

The built-in "tiny" presets are trained from scratch (full-parameter), so
CPU-only overfit runs finish in seconds. LoRA wraps nn.Linear layers for the
case where a pretrained checkpoint is being adapted.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .tokenizer import IGNORE_INDEX, VOCAB_SIZE


@dataclass
class ModelConfig:
    vocab_size: int = VOCAB_SIZE
    d_model: int = 64
    n_heads: int = 2
    n_layers: int = 2
    max_seq: int = 256
    dropout: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


_PRESET_RE = re.compile(r"^tiny(?::(\d+)x(\d+))?$")


def parse_preset(name: str) -> ModelConfig | None:
    """tiny or tiny:<layers>x<d_model>; None when the name is not a preset."""
    m = _PRESET_RE.match(name)
    if not m:
        return None
    cfg = ModelConfig()
    if m.group(1):
        cfg.n_layers = int(m.group(1))
        cfg.d_model = int(m.group(2))
    return cfg


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.qkv = nn.Linear(cfg.d_model, 3 * cfg.d_model)
        self.proj = nn.Linear(cfg.d_model, cfg.d_model)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.mlp_up = nn.Linear(cfg.d_model, 4 * cfg.d_model)
        self.mlp_down = nn.Linear(4 * cfg.d_model, cfg.d_model)
        self.n_heads = cfg.n_heads
        self.dropout = cfg.dropout

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        q, k, v = self.qkv(self.ln1(x)).chunk(3, dim=-1)
        shape = (b, t, self.n_heads, d // self.n_heads)
        q, k, v = (z.view(shape).transpose(1, 2) for z in (q, k, v))
        attn = F.scaled_dot_product_attention(
            q, k, v, is_causal=True, dropout_p=self.dropout if self.training else 0.0
        )
        x = x + self.proj(attn.transpose(1, 2).reshape(b, t, d))
        x = x + self.mlp_down(F.gelu(self.mlp_up(self.ln2(x))))
        return x


class TinyGPT(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.max_seq, cfg.d_model)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.d_model)
        self.head = nn.Linear(cfg.d_model, cfg.vocab_size, bias=False)

    def forward(self, idx: torch.Tensor) -> torch.Tensor:
        b, t = idx.shape
        if t > self.cfg.max_seq:
            raise ValueError(f"sequence length {t} exceeds max_seq {self.cfg.max_seq}")
        pos = torch.arange(t, device=idx.device)
        x = self.tok_emb(idx) + self.pos_emb(pos)[None, :, :]
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln_f(x))

    def loss(self, idx: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        logits = self.forward(idx)
        return F.cross_entropy(
            logits[:, :-1].reshape(-1, self.cfg.vocab_size),
            labels[:, 1:].reshape(-1),
            ignore_index=IGNORE_INDEX,
        )

    @torch.no_grad()
    def generate(
        self,
        prompt_ids: list[int],
        max_new_tokens: int,
        temperature: float = 1.0,
        eos_id: int | None = None,
        generator: torch.Generator | None = None,
    ) -> list[int]:
        self.eval()
        ids = list(prompt_ids)[-self.cfg.max_seq :]
        out: list[int] = []
        for _ in range(max_new_tokens):
            window = torch.tensor([ids[-self.cfg.max_seq :]], dtype=torch.long)
            logits = self.forward(window)[0, -1]
            if temperature <= 0.0:
                nxt = int(torch.argmax(logits))
            else:
                probs = F.softmax(logits / temperature, dim=-1)
                nxt = int(torch.multinomial(probs, 1, generator=generator))
            if eos_id is not None and nxt == eos_id:
                break
            ids.append(nxt)
            out.append(nxt)
        return out


# ---------------------------------------------------------------------------
# LoRA
# ---------------------------------------------------------------------------

DEFAULT_LORA_TARGETS = r"(qkv|proj|mlp_up|mlp_down|q_proj|k_proj|v_proj|o_proj|gate_proj|up_proj|down_proj)$"


class LoRALinear(nn.Module):
    """Frozen base linear plus a trainable low-rank update."""

    def __init__(self, base: nn.Linear, rank: int = 8, alpha: float = 16.0):
        super().__init__()
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.lora_a = nn.Parameter(torch.zeros(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))
        self.scale = alpha / rank

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + F.linear(F.linear(x, self.lora_a), self.lora_b) * self.scale


def apply_lora(
    model: nn.Module, rank: int = 8, alpha: float = 16.0, targets: str = DEFAULT_LORA_TARGETS
) -> int:
    """Freeze the model and wrap matching Linear layers; returns wrap count."""
    pattern = re.compile(targets)
    for p in model.parameters():
        p.requires_grad_(False)
    wrapped = 0
    for module in list(model.modules()):
        for name, child in list(module.named_children()):
            if isinstance(child, nn.Linear) and pattern.search(name):
                setattr(module, name, LoRALinear(child, rank=rank, alpha=alpha))
                wrapped += 1
    if wrapped == 0:
        raise ValueError(f"no Linear layers matched LoRA targets {targets!r}")
    return wrapped


def merge_lora(model: nn.Module) -> int:
    """Fold adapter updates into the base weights so the artifact stays a
    plain checkpoint; returns the number of merged layers."""
    merged = 0
    for module in list(model.modules()):
        for name, child in list(module.named_children()):
            if isinstance(child, LoRALinear):
                with torch.no_grad():
                    child.base.weight += child.scale * (child.lora_b @ child.lora_a)
                setattr(module, name, child.base)
                merged += 1
    return merged


def trainable_parameters(model: nn.Module):
    return [p for p in model.parameters() if p.requires_grad]
