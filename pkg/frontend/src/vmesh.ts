// Parser for the engine's binary .vmesh format (all little-endian).

export interface VMesh {
  vertexCount: number;
  triangleCount: number;
  featureDim: number;
  positions: Float32Array; // 3 per vertex
  triangles: Uint32Array; // 3 per triangle
  features: Float32Array | null; // featureDim per vertex
  classes: Int32Array | null; // -1 = unlabeled
  heat: Float32Array | null; // display heat in [0, 1]
}

const MAGIC = 0x48534d56; // "VMSH"
const FLAG_FEATURES = 1;
const FLAG_HEAT = 2;

export function parseVMesh(buffer: ArrayBuffer): VMesh {
  const view = new DataView(buffer);
  if (buffer.byteLength < 20 || view.getUint32(0, true) !== MAGIC) {
    throw new Error("not a VMSH mesh");
  }
  const vertexCount = view.getUint32(4, true);
  const triangleCount = view.getUint32(8, true);
  const featureDim = view.getUint32(12, true);
  const flags = view.getUint32(16, true);
  let offset = 20;

  const take = (bytes: number): ArrayBuffer => {
    if (offset + bytes > buffer.byteLength) {
      throw new Error("truncated VMSH block");
    }
    const slice = buffer.slice(offset, offset + bytes);
    offset += bytes;
    return slice;
  };

  const positions = new Float32Array(take(vertexCount * 12));
  const triangles = new Uint32Array(take(triangleCount * 12));
  let features: Float32Array | null = null;
  let classes: Int32Array | null = null;
  let heat: Float32Array | null = null;
  if (flags & FLAG_FEATURES) {
    features = new Float32Array(take(vertexCount * featureDim * 4));
    classes = new Int32Array(take(vertexCount * 4));
  }
  if (flags & FLAG_HEAT) {
    heat = new Float32Array(take(vertexCount * 4));
  }
  return { vertexCount, triangleCount, featureDim, positions, triangles, features, classes, heat };
}
