#!/usr/bin/env python3
"""Florence-2 inference worker driven by the C++ bridge over stdin/stdout.

Each request is one JSON line. An "infer" request is followed by `nbytes` raw
pixel bytes (row-major, rgb8 or mono8). Each reply is one JSON line with
"ok" set, plus "error"/"detail" on failure.
"""

import json
import sys
import time


def reply(**fields):
    sys.stdout.write(json.dumps(fields) + "\n")
    sys.stdout.flush()


def fail(error, detail):
    reply(ok=False, error=error, detail=str(detail))


class Worker:
    def __init__(self):
        self.model = None
        self.processor = None
        self.device = "cpu"
        self.dtype = None

    def load(self, req):
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoProcessor
        except ImportError as exc:
            return fail("INFERENCE_FAILURE", f"runtime missing: {exc}")

        device = req.get("device", "cpu")
        if device.startswith("cuda") and not torch.cuda.is_available():
            return fail("GPU_UNAVAILABLE", f"{device} requested but CUDA is unavailable")
        dtype = torch.float16 if req.get("dtype") == "float16" else torch.float32
        source = req.get("model_path") or req["model_id"]
        kwargs = {"trust_remote_code": True}
        if not req.get("model_path"):
            if req.get("revision"):
                kwargs["revision"] = req["revision"]
            kwargs["local_files_only"] = not req.get("allow_network", False)
        try:
            self.model = AutoModelForCausalLM.from_pretrained(source, torch_dtype=dtype, **kwargs)
            self.model = self.model.to(device).eval()
            self.processor = AutoProcessor.from_pretrained(source, **kwargs)
        except (OSError, ValueError) as exc:
            return fail("MODEL_NOT_FOUND", exc)
        except torch.cuda.OutOfMemoryError as exc:
            return fail("OUT_OF_MEMORY", exc)
        except RuntimeError as exc:
            if "out of memory" in str(exc).lower():
                return fail("OUT_OF_MEMORY", exc)
            return fail("INFERENCE_FAILURE", exc)
        self.device = device
        self.dtype = dtype
        label = req["model_id"]
        revision = req.get("revision") or getattr(self.model.config, "_commit_hash", None)
        if revision:
            label += "@" + revision
        reply(ok=True, model=label)

    def infer(self, req, payload):
        import numpy as np
        import torch
        from PIL import Image

        if self.model is None:
            return fail("INFERENCE_FAILURE", "model not loaded")
        width, height, channels = req["width"], req["height"], req["channels"]
        pixels = np.frombuffer(payload, dtype=np.uint8)
        if channels == 3:
            image = Image.fromarray(pixels.reshape(height, width, 3), "RGB")
        else:
            image = Image.fromarray(pixels.reshape(height, width), "L").convert("RGB")
        start = time.perf_counter()
        try:
            inputs = self.processor(text=req["prompt"], images=image, return_tensors="pt")
            inputs = {k: v.to(self.device) for k, v in inputs.items()}
            if "pixel_values" in inputs:
                inputs["pixel_values"] = inputs["pixel_values"].to(self.dtype)
            with torch.inference_mode():
                generated = self.model.generate(
                    input_ids=inputs["input_ids"],
                    pixel_values=inputs["pixel_values"],
                    max_new_tokens=req["max_new_tokens"],
                    num_beams=req["num_beams"],
                    do_sample=req["do_sample"],
                )
            raw = self.processor.batch_decode(generated, skip_special_tokens=False)[0]
            parsed = self.processor.post_process_generation(
                raw, task=req["task"], image_size=(width, height))
        except torch.cuda.OutOfMemoryError as exc:
            return fail("OUT_OF_MEMORY", exc)
        except Exception as exc:  # surfaced to the bridge as INFERENCE_FAILURE
            return fail("INFERENCE_FAILURE", exc)
        reply(ok=True, raw_text=raw, parsed=parsed,
              inference_time=time.perf_counter() - start)


def read_exact(stream, count):
    chunks = []
    while count > 0:
        chunk = stream.read(count)
        if not chunk:
            raise EOFError("payload truncated")
        chunks.append(chunk)
        count -= len(chunk)
    return b"".join(chunks)


def main():
    worker = Worker()
    stdin = sys.stdin.buffer
    while True:
        line = stdin.readline()
        if not line:
            return 0
        req = json.loads(line)
        op = req.get("op")
        if op == "load":
            worker.load(req)
        elif op == "infer":
            worker.infer(req, read_exact(stdin, req["nbytes"]))
        else:
            fail("INFERENCE_FAILURE", f"unknown op {op!r}")


if __name__ == "__main__":
    sys.exit(main())
