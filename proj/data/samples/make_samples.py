"""Regenerates the sample BVH corpus used by the round-trip tests.

Clips are procedural (sinusoidal gaits), written with a mix of Euler
orders and left/right naming schemes.
"""
import math
import pathlib

HERE = pathlib.Path(__file__).parent


def fmt(v):
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


class Node:
    def __init__(self, name, offset, channels, children=(), end=None):
        self.name, self.offset, self.channels = name, offset, channels
        self.children, self.end = list(children), end


def write(path, root, frames, frame_time):
    out = ["HIERARCHY"]

    def emit(node, depth, is_root):
        ind = "\t" * depth
        out.append(f"{ind}{'ROOT' if is_root else 'JOINT'} {node.name}")
        out.append(f"{ind}{{")
        out.append(f"{ind}\tOFFSET " + " ".join(fmt(x) for x in node.offset))
        out.append(f"{ind}\tCHANNELS {len(node.channels)} " + " ".join(node.channels))
        for c in node.children:
            emit(c, depth + 1, False)
        if node.end is not None:
            out.extend([f"{ind}\tEnd Site", f"{ind}\t{{", f"{ind}\t\tOFFSET " + " ".join(fmt(x) for x in node.end), f"{ind}\t}}"])
        out.append(f"{ind}}}")

    emit(root, 0, True)
    out += ["MOTION", f"Frames: {len(frames)}", f"Frame Time: {frame_time:.7f}"]
    out += [" ".join(fmt(v) for v in row) for row in frames]
    (HERE / path).write_text("\n".join(out) + "\n")


ZXY = ["Zrotation", "Xrotation", "Yrotation"]
XYZ = ["Xrotation", "Yrotation", "Zrotation"]
YXZ = ["Yrotation", "Xrotation", "Zrotation"]
POS = ["Xposition", "Yposition", "Zposition"]


def leg(side, x, z, order):
    return Node(f"{side}UpperLeg{'Front' if z > 0 else 'Back'}", (x, -2.0, z), order, [
        Node(f"{side}LowerLeg{'Front' if z > 0 else 'Back'}", (0.0, -14.0, 0.0), order, [
            Node(f"{side}Foot{'Front' if z > 0 else 'Back'}", (0.0, -13.0, 1.0), order, end=(0.0, -2.0, 3.0))])])


def quadruped():
    spine = Node("Spine", (0.0, 1.0, 12.0), ZXY, [
        Node("Neck", (0.0, 4.0, 14.0), ZXY, [Node("Head", (0.0, 3.0, 6.0), ZXY, end=(0.0, 0.0, 9.0))]),
        leg("Left", 6.0, 10.0, ZXY), leg("Right", -6.0, 10.0, ZXY)])
    tail = Node("Tail1", (0.0, 2.0, -10.0), XYZ, [Node("Tail2", (0.0, 0.0, -8.0), XYZ, end=(0.0, 0.0, -8.0))])
    hips = Node("Hips", (0.0, 30.0, 0.0), POS + ZXY, [spine, tail, leg("Left", 6.0, -4.0, ZXY), leg("Right", -6.0, -4.0, ZXY)])
    return hips


def count(node):
    return len(node.channels) + sum(count(c) for c in node.children)


def order_of(node, acc):
    acc.append(node)
    for c in node.children:
        order_of(c, acc)
    return acc


def animate(root, n, fn):
    nodes = order_of(root, [])
    rows = []
    for f in range(n):
        row = []
        for node in nodes:
            row += fn(node, f)
        rows.append(row)
    return rows


def quadruped_walk():
    root = quadruped()

    def fn(node, f):
        t = f / 30.0
        ph = 2 * math.pi * 1.5 * t
        if node.name == "Hips":
            return [0.0, 30.0 + 0.8 * math.sin(2 * ph), 40.0 * t, 2.0 * math.sin(ph), 1.5 * math.sin(2 * ph), 5.0 * t]
        sign = 1.0 if "Left" in node.name else -1.0
        front = 0.0 if "Front" in node.name else math.pi
        if "Upper" in node.name:
            return [0.0, 25.0 * sign * math.sin(ph + front), 0.0]
        if "Lower" in node.name:
            return [0.0, -20.0 * max(0.0, math.sin(ph + front + 0.5)), 0.0]
        if node.name.startswith("Tail"):
            return [0.0, 12.0 * math.sin(ph * 0.5), 3.0 * math.cos(ph)]
        return [1.0 * math.sin(ph), 2.0 * math.cos(ph), 0.5 * math.sin(ph)]

    write("quadruped_walk.bvh", root, animate(root, 48, fn), 1.0 / 30.0)


def bird_flap():
    def wing(side, x):
        return Node(f"{side}_Wing1", (x, 2.0, 0.0), YXZ, [Node(f"{side}_Wing2", (x * 2.0, 0.0, 0.0), YXZ, end=(x * 2.5, 0.0, -1.0))])

    def bird_leg(side, x):
        return Node(f"{side}_Thigh", (x, -1.0, 0.0), XYZ, [Node(f"{side}_Shin", (0.0, -4.0, 0.5), XYZ, end=(0.0, -3.0, 1.5))])

    root = Node("Body", (0.0, 8.0, 0.0), POS + YXZ, [
        Node("Neck", (0.0, 2.0, 3.0), YXZ, [Node("Head", (0.0, 2.0, 1.0), YXZ, end=(0.0, 0.0, 2.0))]),
        wing("L", 2.0), wing("R", -2.0), bird_leg("L", 1.0), bird_leg("R", -1.0)])

    def fn(node, f):
        ph = 2 * math.pi * f / 12.0
        if node.name == "Body":
            return [0.0, 8.0 + 3.0 * math.sin(ph), 0.6 * f, 4.0 * math.sin(ph / 3), 10.0 * math.sin(ph), 0.0]
        sign = 1.0 if node.name.startswith("L_") else -1.0
        if "Wing" in node.name:
            return [0.0, 5.0, sign * 55.0 * math.sin(ph)]
        return [10.0 * math.cos(ph), 0.0, 0.0]

    write("bird_flap.bvh", root, animate(root, 36, fn), 1.0 / 24.0)


def snake_slither():
    node = None
    for i in reversed(range(8)):
        node = Node(f"Seg{i}", (0.0, 0.0, -6.0 if i else 0.0) if i else (0.0, 1.0, 0.0),
                    (POS + XYZ) if i == 0 else XYZ, [node] if node else [], end=None if node else (0.0, 0.0, -4.0))

    def fn(n, f):
        i = int(n.name[3:])
        ph = 2 * math.pi * (f / 20.0 - i / 8.0)
        if i == 0:
            return [0.0, 1.0, 1.2 * f, 0.0, 30.0 * math.sin(ph), 0.0]
        return [0.0, 25.0 * math.sin(ph), 0.0]

    write("snake_slither.bvh", node, animate(node, 40, fn), 1.0 / 30.0)


def chain_mixed():
    root = Node("root", (0.0, 0.0, 0.0), ["Xposition", "Zposition", "Yposition", "Yrotation", "Zrotation", "Xrotation"], [
        Node("upper arm", (1.5, 0.0, 0.0), ["Xrotation", "Zrotation", "Yrotation"], [
            Node("fore_arm", (0.0, 2.25, -0.125), ["Zrotation", "Yrotation", "Xrotation"], end=(0.0, 1.0, 0.0))]),
        Node("marker", (0.0, -1.0, 0.0), [], end=(0.0, -0.5, 0.0))])

    def fn(n, f):
        if n.name == "root":
            return [0.1 * f, -0.05 * f, 1.0, 7.0 * f, -3.0 * f, 1.25 * f]
        if n.name == "marker":
            return []
        return [11.0 * math.sin(f), -37.5 + 2.0 * f, 89.0 * math.cos(f / 3)]

    write("chain_mixed_orders.bvh", root, animate(root, 10, fn), 0.008333)


if __name__ == "__main__":
    quadruped_walk()
    bird_flap()
    snake_slither()
    chain_mixed()
