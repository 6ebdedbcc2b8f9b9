"""In-memory message pump used by protocol-level tests (no transport timing)."""

from __future__ import annotations

from random import Random

import numpy as np

from dcp import protocol as proto
from dcp import wire
from dcp.embedding import cosine_to_score, make_profiles, quantize
from dcp.zkp import Threshold


class MiniRig:
    """A dashcam plus n enrolled devices wired through direct-delivery links."""

    def __init__(self, n=3, dim=32, seed=99, face_t=0.5, voice_t=0.5, params=None):
        from dcp import he

        self.params = params or he.test_params()
        self.np_rng = np.random.default_rng(seed)
        self.profiles = make_profiles(n, dim, self.np_rng, noise_sigma=0.05)
        thresholds = {
            "face": Threshold(cosine_to_score(face_t)),
            "voice": Threshold(cosine_to_score(voice_t)),
        }
        self.devices = {
            link: proto.enroll_device(
                self.params,
                quantize(p.face_mean),
                quantize(p.voice_mean),
                thresholds,
                Random(seed * 1000 + link),
            )
            for link, p in enumerate(self.profiles)
        }
        self.dashcam = proto.make_dashcam(self.params, Random(seed))

    def to_dashcam(self, link, messages):
        """Deliver device messages to the dashcam; returns dashcam replies."""
        out = []
        for m in messages:
            frame = wire.encode(m, self.params)
            _, replies = proto.dashcam_step(self.dashcam, proto.Inbound(link, frame))
            out.extend(replies)
        return out

    def to_device(self, link, message):
        frame = wire.encode(message, self.params)
        _, replies = proto.device_step(self.devices[link], proto.Inbound(0, frame))
        return replies

    def connect_all(self):
        for link, dev in self.devices.items():
            _, msgs = proto.device_step(dev, proto.StartConnect())
            for dlink, reply in self.to_dashcam(link, msgs):
                more = self.to_device(dlink, reply)
                self.to_dashcam(dlink, more)

    def pump_round(self, outbound):
        """Deliver dashcam challenges and feed replies back until quiet."""
        for link, msg in outbound:
            replies = self.to_device(link, msg)
            self.to_dashcam(link, replies)

    def exchange(self, outbound):
        frames = []
        for link, msg in outbound:
            for reply in self.to_device(link, msg):
                frames.append((link, wire.encode(reply, self.params)))
        return frames

    def device_id_of(self, link):
        for device_id, entry in self.dashcam.roster.items():
            if entry.link == link:
                return device_id
        return None

    def link_of(self, device_id):
        entry = self.dashcam.roster.get(device_id)
        return entry.link if entry else None
