import numpy as np
import pytest

from atat.adversarial import DiscriminatorModel, GeneratorModel, gen_forward
from atat.autoencoder import AutoencoderModel
from atat.autograd.checkpoint import decode, encode, load_checkpoint, save_checkpoint
from atat.config import RunConfig
from atat.errors import ConfigError
from atat.gate import GateModel, gate_probabilities
from atat.masking import tokenize
from atat.workflow import load_ae, load_gate, load_generator, load_system, save_ae, save_gan, save_gate


def test_encode_decode_bit_exact():
    rng = np.random.default_rng(0)
    state = {"a": rng.standard_normal((3, 4)).astype(np.float32), "b.c": np.float32([7.5]),
             "scalar": np.array(1.25, dtype=np.float32)}
    back = decode(encode(state))
    assert list(back) == list(state)
    for k in state:
        assert back[k].shape == state[k].shape and back[k].tobytes() == state[k].tobytes()
    assert encode(back) == encode(state)


@pytest.mark.parametrize("mutate,msg", [(lambda b: b"XXXX" + b[4:], "bad magic"),
                                        (lambda b: b[:-3], "truncated"),
                                        (lambda b: b + b"\0", "trailing"),
                                        (lambda b: b[:4] + b"\x09" + b[5:], "version")])
def test_corrupt_files_name_the_path(tmp_path, mutate, msg):
    p = save_checkpoint(tmp_path / "m.ckpt", {"w": np.ones((2, 2), np.float32)})
    p.write_bytes(mutate(p.read_bytes()))
    with pytest.raises(ConfigError, match=msg) as e:
        load_checkpoint(p)
    assert str(p) in str(e.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_checkpoint(tmp_path / "nope.ckpt")


def test_model_round_trips(tmp_path):
    cfg = RunConfig()
    ae = AutoencoderModel(seed=3)
    assert encode(load_ae(cfg, save_ae(ae, tmp_path / "ae.ckpt")).state_dict("ae")) == encode(ae.state_dict("ae"))

    gen = GeneratorModel(seed=4)
    gen.head.weight.data[...] = 0.1
    got = load_generator(save_gan(gen, DiscriminatorModel(), tmp_path / "gan.ckpt"))
    ts = tokenize(np.linspace(0, 1, 512), np.linspace(0, 1, 512), np.arange(512) < 64)
    assert gen_forward(got, ts).tobytes() == gen_forward(gen.eval(), ts).tobytes()

    gate = GateModel(seed=5).eval()
    back = load_gate(cfg, save_gate(gate, tmp_path / "gate.ckpt"))
    x = np.random.default_rng(1).standard_normal((3, 512))
    assert back.classes == gate.classes
    assert gate_probabilities(back, x).tobytes() == gate_probabilities(gate, x).tobytes()


def test_mismatched_architecture(tmp_path):
    p = save_checkpoint(tmp_path / "ae_-7dB.ckpt", {"ae.wrong": np.zeros(3, np.float32)})
    with pytest.raises(ConfigError, match="does not match"):
        load_ae(RunConfig(), p)


def test_load_system_requires_every_file(tmp_path):
    cfg = RunConfig()
    save_gate(GateModel(), tmp_path / "gate.ckpt")
    save_ae(AutoencoderModel(), tmp_path / "ae_-7dB.ckpt")
    with pytest.raises(ConfigError, match="ae_2dB"):
        load_system(cfg, tmp_path, use_gan=False)
    save_ae(AutoencoderModel(), tmp_path / "ae_2dB.ckpt")
    with pytest.raises(ConfigError, match="gan_-7dB"):
        load_system(cfg, tmp_path)
    system = load_system(cfg, tmp_path, use_gan=False)
    assert sorted(system.autoencoders) == [-7.0, 2.0] and not system.generators
