export type ReviewStatus = 'pending' | 'confirmed' | 'rejected' | 'relabeled';

export interface FlaggedItem {
  id: string;
  lat: number;
  lon: number;
  image_url: string;
  predicted: number;
  confidences: [number, number, number];
  votes: number[];
  status: ReviewStatus;
  new_label: number | null;
}

export interface FlaggedPage {
  items: FlaggedItem[];
  total: number;
}

export interface ReviewVerdict {
  sample_id: string;
  verdict: 'confirm' | 'reject' | 'relabel';
  new_label?: number;
}

export interface OverlayPaths {
  hog_png: string;
  hough_png: string;
  salience_png: string | null;
}

export const CLASS_NAMES = ['no utility', 'utility', 'overgrown vegetation'] as const;
