"""Keyword-separable synthetic review corpus.

Every document mixes two or three keywords of its own class with product
filler words, sometimes one keyword from another class, and surface noise
(capitals, punctuation, slang spellings, emoji, URLs) that the cleaning
pipeline is expected to undo. The generator only uses :class:`SplitMix64`,
so the output is identical on every platform.
"""
from __future__ import annotations

from .corpus import LABELS, LabeledExample, SplitMix64

POSITIVE = (
    "bagus mantap puas cepat rapi recommended keren terbaik suka sempurna memuaskan asli ramah awet nyaman "
    "halus wangi murah berkualitas aman responsif istimewa oke senang cantik elegan lengkap kokoh jempol top"
).split()
NEGATIVE = (
    "jelek rusak kecewa mengecewakan cacat lambat buruk salah palsu ditipu berantakan hancur penipu parah "
    "menyesal retak bocor kotor kasar mahal lecet penyok telat hilang tidak dijanjikan sobek luntur pecah bau"
).split()
NEUTRAL = (
    "lumayan standar biasa cukup medioker wajar netral rata pas harga lumrah umumnya normal seadanya mungkin "
    "kadang agak relatif semoga tergantung sebanding ekspektasi mirip sekadar seimbang moderat campur "
    "begitulah lainnya rerata"
).split()
FILLER = (
    "barang produk seller penjual pengiriman kurir warna ukuran kemasan kualitas sesuai spesifikasi toko "
    "pesanan paket bahan jahitan model foto gambar deskripsi ongkir diskon promo stok varian merek layanan "
    "respon chat admin hari minggu bulan pagi malam rumah kantor kota alamat baju celana sepatu tas jam kabel "
    "charger casing botol sabun kaos jaket topi dompet buku mainan lampu kipas panci piring gelas sendok meja "
    "kursi bantal selimut handuk masker sarung kerudung payung sandal kaca tinta kertas pulpen headset speaker "
    "mouse keyboard laptop kamera tripod senter obeng palu gunting lem selotip karet plastik kayu besi kain "
    "kulit katun resleting kancing tali busa sprei gorden karpet rak ember sapu pisau termos kompor blender"
).split()

KEYWORDS = {"negative": NEGATIVE, "neutral": NEUTRAL, "positive": POSITIVE}
VOCABULARY = tuple(NEGATIVE + NEUTRAL + POSITIVE + FILLER)

# surface spellings the bundled slang lexicon maps back to the canonical word
SLANG_SPELLINGS = {
    "bagus": ("bgus", "bgs"), "mantap": ("mantab", "mantul"), "tidak": ("gk", "ga", "tdk"),
    "cepat": ("cpt", "cepet"), "lambat": ("lemot", "lelet"), "barang": ("brg",), "produk": ("prodak",),
    "rusak": ("rsk",), "jelek": ("jlk",), "kecewa": ("kcewa",), "recommended": ("rekomen", "rekom"),
    "rapi": ("rapih",), "sesuai": ("ssuai",), "kemasan": ("packing",), "kualitas": ("kwalitas",),
}
EMOJI = {"positive": "😍👍😊", "negative": "😡👎😭", "neutral": "😐🤔"}


def _choice(rng: SplitMix64, seq):
    return seq[rng.below(len(seq))]


def _uniform(rng: SplitMix64) -> float:
    return (rng.next_u64() >> 11) / float(1 << 53)


def make_document(rng: SplitMix64, label: str) -> str:
    words = [_choice(rng, KEYWORDS[label]) for _ in range(2 + rng.below(2))]
    if _uniform(rng) < 0.15:
        other = _choice(rng, [c for c in LABELS if c != label])
        words.append(_choice(rng, KEYWORDS[other]))
    words += [_choice(rng, FILLER) for _ in range(3 + rng.below(6))]
    rng.shuffle(words)
    out = []
    for w in words:
        if w in SLANG_SPELLINGS and _uniform(rng) < 0.3:
            w = _choice(rng, SLANG_SPELLINGS[w])
        if _uniform(rng) < 0.15:
            w = w.capitalize() if _uniform(rng) < 0.7 else w.upper()
        if _uniform(rng) < 0.1:
            w += _choice(rng, ("!", "!!", ",", ".", "?"))
        out.append(w)
    text = " ".join(out)
    if _uniform(rng) < 0.1:
        text += " " + _choice(rng, EMOJI[label])
    if _uniform(rng) < 0.05:
        text += " https://toko.example/p/" + str(rng.below(10_000))
    return text[0].upper() + text[1:]


def make_corpus(n_docs: int = 1500, seed: int = 42) -> list[LabeledExample]:
    """Balanced corpus, labels cycling negative/neutral/positive."""
    rng = SplitMix64(seed)
    return [LabeledExample(i, make_document(rng, LABELS[i % 3]), LABELS[i % 3]) for i in range(n_docs)]


def bundled_path():
    from importlib import resources

    return resources.files("sentibench.data").joinpath("synthetic_1500.jsonl")
