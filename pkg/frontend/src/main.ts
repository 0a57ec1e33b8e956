import { HttpReviewApi, ReviewApi } from './api';
import { render } from './render';
import { ReviewSession } from './state';

export function initApp(root: HTMLElement, api?: ReviewApi, annotatorId?: string): ReviewSession {
  const session = new ReviewSession(
    api ?? new HttpReviewApi(''),
    annotatorId ?? window.localStorage.getItem('annotator_id') ?? 'annotator',
  );
  session.onChange = () => render(root, session);

  document.addEventListener('keydown', (event) => {
    if (event.target instanceof HTMLInputElement) return; // typing, not commanding
    if (!session.current) return;
    if (event.key === 'a') void session.submit('accept');
    if (event.key === 'r') void session.submit('reject');
  });

  render(root, session);
  void session.loadQueue();
  return session;
}

declare global {
  interface Window {
    __toolweaveReview?: ReviewSession;
  }
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  window.__toolweaveReview = initApp(document.getElementById('app')!);
}
