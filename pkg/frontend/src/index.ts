export { encodeRle, decodeRle } from "./rle";
export { writeMatrix, readMatrix, Matrix } from "./o3df";
export { readPly, writePly, Cloud } from "./ply";
export { projectPoints, projectedBox, scaleClampBox, FrameRecord, Box } from "./geometry";
export { Embedder, HashEmbedder, ImagePatch } from "./embedder";
export { AdapterConfig, makeConfig, chunkPrompts } from "./config";
export {
  Detection,
  Detector,
  FrameRef,
  exportMasks,
  maskIouFlat,
  suppressDuplicates,
} from "./masks";
export {
  embedMultiscale,
  exportClipFeatures,
  loadBundleFrames,
  loadProposalMasks,
  validateViewIndex,
} from "./clipFeatures";
export { exportTextEmbeddings } from "./textEmbeddings";
export { convertSequence, invertPose, pngSize, readMatrixFile } from "./convert";
